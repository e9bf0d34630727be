#pragma once

// Umbrella header for the library. The HTTP client (semx/io/fetch.hpp) is
// not included here; include it directly where needed.

#include "semx/core_types.hpp"
#include "semx/decode.hpp"
#include "semx/error.hpp"
#include "semx/io/dump_io.hpp"
#include "semx/io/embeddings_io.hpp"
#include "semx/io/kernel_io.hpp"
#include "semx/io/labels_io.hpp"
#include "semx/io/pipeline.hpp"
#include "semx/io/report.hpp"
#include "semx/io/vocab_map.hpp"
#include "semx/kernel.hpp"
#include "semx/metrics.hpp"
#include "semx/synth.hpp"
