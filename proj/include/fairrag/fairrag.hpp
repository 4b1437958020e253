#pragma once

// Umbrella header. The HTTP backend client is kept separate
// (fairrag/backend_client.hpp) so only its users pay for cpp-httplib.

#include "fairrag/ablation.hpp"
#include "fairrag/binary_io.hpp"
#include "fairrag/conditioning.hpp"
#include "fairrag/demographics.hpp"
#include "fairrag/embedding_store.hpp"
#include "fairrag/error.hpp"
#include "fairrag/evaluation.hpp"
#include "fairrag/fair_retrieval.hpp"
#include "fairrag/fixtures.hpp"
#include "fairrag/metrics.hpp"
#include "fairrag/prompt_set.hpp"
#include "fairrag/rng.hpp"
#include "fairrag/run_config.hpp"
