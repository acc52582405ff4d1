#pragma once

#include "gflswing/dynamics.hpp"
#include "gflswing/errors.hpp"
#include "gflswing/fleet.hpp"
#include "gflswing/inverter.hpp"
#include "gflswing/network.hpp"
#include "gflswing/parallel.hpp"
#include "gflswing/pcc.hpp"
#include "gflswing/phasor.hpp"
#include "gflswing/stability.hpp"
