#pragma once

#define SMELAB_VERSION "0.1.0"

#include "smelab/experiments.hpp"
#include "smelab/noise.hpp"
#include "smelab/numerics.hpp"
#include "smelab/rng.hpp"
#include "smelab/sme.hpp"
#include "smelab/systems.hpp"
