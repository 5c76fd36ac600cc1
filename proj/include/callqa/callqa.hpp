#pragma once

#include "callqa/cluster.hpp"
#include "callqa/common.hpp"
#include "callqa/dataset.hpp"
#include "callqa/feature_io.hpp"
#include "callqa/features.hpp"
#include "callqa/metrics.hpp"
#include "callqa/pipeline.hpp"
#include "callqa/rbm.hpp"
#include "callqa/search.hpp"
#include "callqa/transform.hpp"
#include "callqa/wav.hpp"
