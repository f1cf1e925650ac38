#pragma once

// Umbrella header for the whole library.

#include "bycs/bm25.hpp"
#include "bycs/cache.hpp"
#include "bycs/datastore.hpp"
#include "bycs/errors.hpp"
#include "bycs/evaluate.hpp"
#include "bycs/knn.hpp"
#include "bycs/metrics.hpp"
#include "bycs/model.hpp"
#include "bycs/prompt.hpp"
#include "bycs/remote.hpp"
#include "bycs/sample.hpp"
#include "bycs/select.hpp"
#include "bycs/tokenize.hpp"
#include "bycs/types.hpp"
#include "bycs/world.hpp"
