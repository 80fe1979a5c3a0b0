#pragma once

#include "latticewave/bdf.hpp"
#include "latticewave/config.hpp"
#include "latticewave/fullydiscrete.hpp"
#include "latticewave/grid.hpp"
#include "latticewave/kernel.hpp"
#include "latticewave/model.hpp"
#include "latticewave/semidiscrete.hpp"
#include "latticewave/spectral.hpp"
#include "latticewave/timesim.hpp"
