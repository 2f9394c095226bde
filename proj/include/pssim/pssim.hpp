#pragma once

#include "pssim/cluster.hpp"
#include "pssim/data.hpp"
#include "pssim/errors.hpp"
#include "pssim/experiment.hpp"
#include "pssim/fixedpoint.hpp"
#include "pssim/metrics.hpp"
#include "pssim/model.hpp"
#include "pssim/numeric.hpp"
#include "pssim/optim.hpp"
#include "pssim/rng.hpp"
