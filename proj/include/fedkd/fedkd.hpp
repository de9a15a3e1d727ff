#pragma once

// Umbrella header for the federated distillation simulator.

#include "fedkd/comm.hpp"
#include "fedkd/config.hpp"
#include "fedkd/dataset.hpp"
#include "fedkd/errors.hpp"
#include "fedkd/experiment.hpp"
#include "fedkd/federation.hpp"
#include "fedkd/losses.hpp"
#include "fedkd/matrix.hpp"
#include "fedkd/metrics.hpp"
#include "fedkd/model.hpp"
#include "fedkd/optimizer.hpp"
#include "fedkd/partition.hpp"
#include "fedkd/public_data.hpp"
#include "fedkd/rng.hpp"
#include "fedkd/runners.hpp"
