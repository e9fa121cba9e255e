#pragma once

#include "errors.hpp"
#include "model.hpp"
#include "dynamics.hpp"
#include "equilibria.hpp"
#include "sbm.hpp"
#include "io.hpp"
