// Copyright 2026 The posloss Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <posloss/channel.hpp>
#include <posloss/core.hpp>
#include <posloss/dataset.hpp>
#include <posloss/fading.hpp>
#include <posloss/linksim.hpp>
#include <posloss/metrics.hpp>
#include <posloss/regress.hpp>
#include <posloss/rng.hpp>
#include <posloss/synth.hpp>
