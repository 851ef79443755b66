#pragma once

// Umbrella header for the kanlab workbench.

#include "kanlab/activations.hpp"
#include "kanlab/checkpoint.hpp"
#include "kanlab/dataset.hpp"
#include "kanlab/grid.hpp"
#include "kanlab/hsic.hpp"
#include "kanlab/init.hpp"
#include "kanlab/layers.hpp"
#include "kanlab/loaders.hpp"
#include "kanlab/metrics.hpp"
#include "kanlab/optim.hpp"
#include "kanlab/report.hpp"
#include "kanlab/spline.hpp"
#include "kanlab/svg.hpp"
#include "kanlab/synthetic.hpp"
#include "kanlab/tape.hpp"
#include "kanlab/tensor.hpp"
#include "kanlab/train.hpp"
