// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sparsekit/activation.hpp"
#include "sparsekit/beir.hpp"
#include "sparsekit/encoder.hpp"
#include "sparsekit/error.hpp"
#include "sparsekit/inverted_index.hpp"
#include "sparsekit/io.hpp"
#include "sparsekit/losses.hpp"
#include "sparsekit/matrix.hpp"
#include "sparsekit/metrics.hpp"
#include "sparsekit/pipeline.hpp"
#include "sparsekit/random.hpp"
#include "sparsekit/sparse_vector.hpp"
#include "sparsekit/sweep.hpp"
#include "sparsekit/trainer.hpp"
#include "sparsekit/vocabulary.hpp"
