#pragma once

#include "wardrop/alg2.hpp"
#include "wardrop/config.hpp"
#include "wardrop/core_model.hpp"
#include "wardrop/errors.hpp"
#include "wardrop/expression.hpp"
#include "wardrop/fem.hpp"
#include "wardrop/geometry.hpp"
#include "wardrop/io.hpp"
#include "wardrop/mesh.hpp"
#include "wardrop/network.hpp"
#include "wardrop/prox.hpp"
#include "wardrop/scenarios.hpp"
#include "wardrop/sparse.hpp"
#include "wardrop/suite.hpp"
