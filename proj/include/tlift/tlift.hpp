#pragma once

#include "tlift/error.hpp"
#include "tlift/tensor.hpp"
#include "tlift/jet.hpp"
#include "tlift/expr.hpp"
#include "tlift/geometry.hpp"
#include "tlift/catalog.hpp"
#include "tlift/bundle.hpp"
#include "tlift/lifts.hpp"
#include "tlift/sampling.hpp"
#include "tlift/symmetry.hpp"
#include "tlift/transport.hpp"
