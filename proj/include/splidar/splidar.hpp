#pragma once

// Umbrella header: multi-surface 3D reconstruction from single-photon lidar
// photon-count histograms, with a forward simulator and evaluation tools.

#include "splidar/cloud.hpp"
#include "splidar/config.hpp"
#include "splidar/cube.hpp"
#include "splidar/denoise.hpp"
#include "splidar/eval.hpp"
#include "splidar/grid.hpp"
#include "splidar/io.hpp"
#include "splidar/likelihood.hpp"
#include "splidar/parallel.hpp"
#include "splidar/reconstruct.hpp"
#include "splidar/rng.hpp"
#include "splidar/sensor.hpp"
#include "splidar/simulate.hpp"
#include "splidar/spatial_index.hpp"
#include "splidar/sweep.hpp"
