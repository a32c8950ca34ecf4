#pragma once

#include "dynest/bounds.hpp"
#include "dynest/dynamics.hpp"
#include "dynest/estimators.hpp"
#include "dynest/experiments.hpp"
#include "dynest/kernels.hpp"
#include "dynest/points.hpp"
#include "dynest/regularity.hpp"
#include "dynest/stochastics.hpp"
