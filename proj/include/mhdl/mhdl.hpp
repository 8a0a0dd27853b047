#pragma once

#include "mhdl/config.hpp"
#include "mhdl/diagnostics.hpp"
#include "mhdl/dynamics.hpp"
#include "mhdl/elliptic.hpp"
#include "mhdl/errors.hpp"
#include "mhdl/geometry.hpp"
#include "mhdl/grid.hpp"
#include "mhdl/io.hpp"
#include "mhdl/presets.hpp"
#include "mhdl/runner.hpp"
#include "mhdl/smoothing.hpp"
