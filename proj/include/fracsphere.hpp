#pragma once

#include "fracsphere/app.hpp"
#include "fracsphere/digest.hpp"
#include "fracsphere/energy.hpp"
#include "fracsphere/frac_ops.hpp"
#include "fracsphere/grid.hpp"
#include "fracsphere/io.hpp"
#include "fracsphere/kernels.hpp"
#include "fracsphere/lab.hpp"
#include "fracsphere/parallel.hpp"
#include "fracsphere/solver.hpp"
#include "fracsphere/special.hpp"
#include "fracsphere/spectral.hpp"
