// Copyright 2026 The dpinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dpinpaint/common.hpp"
#include "dpinpaint/cqt.hpp"
#include "dpinpaint/cqt_io.hpp"
#include "dpinpaint/denoisers.hpp"
#include "dpinpaint/diffusion.hpp"
#include "dpinpaint/fft.hpp"
#include "dpinpaint/inpaint.hpp"
#include "dpinpaint/janssen.hpp"
#include "dpinpaint/job_config.hpp"
#include "dpinpaint/metrics.hpp"
#include "dpinpaint/rng.hpp"
#include "dpinpaint/wav.hpp"
