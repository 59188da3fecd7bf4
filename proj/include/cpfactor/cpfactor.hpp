#pragma once

#include "cpfactor/errors.hpp"
#include "cpfactor/tensor.hpp"
#include "cpfactor/linalg.hpp"
#include "cpfactor/rng.hpp"
#include "cpfactor/covariance.hpp"
#include "cpfactor/init.hpp"
#include "cpfactor/iso.hpp"
#include "cpfactor/rank.hpp"
#include "cpfactor/inference.hpp"
