#pragma once

#include "mzchain/types.hpp"
#include "mzchain/core.hpp"
#include "mzchain/oracle.hpp"
#include "mzchain/analysis.hpp"
#include "mzchain/estimation.hpp"
#include "mzchain/imaging.hpp"
