#pragma once

#include "eshelby/emt_bounds.hpp"
#include "eshelby/error.hpp"
#include "eshelby/geometry.hpp"
#include "eshelby/green_operator.hpp"
#include "eshelby/json_io.hpp"
#include "eshelby/potentials.hpp"
#include "eshelby/tensor_core.hpp"
#include "eshelby/uniformity.hpp"
#include "eshelby/variational.hpp"
