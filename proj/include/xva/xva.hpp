#pragma once

#include "closeout.hpp"
#include "contracts.hpp"
#include "curve.hpp"
#include "error.hpp"
#include "hedge_sim.hpp"
#include "market_model.hpp"
#include "xva_mc.hpp"
#include "xva_pde.hpp"
