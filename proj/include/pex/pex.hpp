// SPDX-License-Identifier: MIT
//
// Umbrella header: the whole library.
#pragma once

#include "pex/common.hpp"
#include "pex/ensembles.hpp"
#include "pex/extension.hpp"
#include "pex/fft.hpp"
#include "pex/geometry.hpp"
#include "pex/profile.hpp"
#include "pex/report.hpp"
#include "pex/selection.hpp"
#include "pex/verify.hpp"
#include "pex/wavepacket.hpp"
