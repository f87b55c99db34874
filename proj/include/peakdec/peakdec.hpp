#pragma once
// Umbrella header for the whole toolkit.

#include "peakdec/checkpoint.hpp"
#include "peakdec/dataset.hpp"
#include "peakdec/errors.hpp"
#include "peakdec/evaluate.hpp"
#include "peakdec/format.hpp"
#include "peakdec/kernel.hpp"
#include "peakdec/metrics.hpp"
#include "peakdec/operators.hpp"
#include "peakdec/parallel.hpp"
#include "peakdec/report.hpp"
#include "peakdec/rng.hpp"
#include "peakdec/simulate.hpp"
#include "peakdec/solvers.hpp"
#include "peakdec/train.hpp"
#include "peakdec/unrolled.hpp"
#include "peakdec/vecops.hpp"
