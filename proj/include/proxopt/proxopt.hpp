#pragma once

#include "proxopt/combined.hpp"
#include "proxopt/diagnostics.hpp"
#include "proxopt/errors.hpp"
#include "proxopt/gpa.hpp"
#include "proxopt/kkt.hpp"
#include "proxopt/ledger.hpp"
#include "proxopt/manifold.hpp"
#include "proxopt/newton.hpp"
#include "proxopt/problems.hpp"
#include "proxopt/sweep.hpp"
#include "proxopt/trace.hpp"
#include "proxopt/types.hpp"
