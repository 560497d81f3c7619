#ifndef MPCG_MPCG_HPP
#define MPCG_MPCG_HPP

#include "dataset.hpp"
#include "error.hpp"
#include "features.hpp"
#include "matrix_market.hpp"
#include "regression.hpp"
#include "solver.hpp"
#include "sparse.hpp"

#endif // MPCG_MPCG_HPP
