#pragma once

// Umbrella header for the whole toolkit.

#include "lcnr/beam.hpp"
#include "lcnr/config.hpp"
#include "lcnr/csv.hpp"
#include "lcnr/dataset.hpp"
#include "lcnr/errors.hpp"
#include "lcnr/logic.hpp"
#include "lcnr/nn.hpp"
#include "lcnr/report.hpp"
#include "lcnr/rng.hpp"
#include "lcnr/tensor.hpp"
#include "lcnr/train.hpp"
