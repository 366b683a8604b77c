// SPDX-License-Identifier: Apache-2.0
// chansem - channel semantics characterization toolkit

#pragma once

#include "chansem/clustering.hpp"
#include "chansem/core.hpp"
#include "chansem/dsp.hpp"
#include "chansem/engine.hpp"
#include "chansem/pipeline.hpp"
#include "chansem/scene.hpp"
#include "chansem/semantics.hpp"
#include "chansem/semantics_io.hpp"
#include "chansem/simulate.hpp"
#include "chansem/store.hpp"
#include "chansem/tracking.hpp"
