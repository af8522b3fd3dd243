// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gacoop/config.hpp"
#include "gacoop/error.hpp"
#include "gacoop/feature_bank.hpp"
#include "gacoop/grad_align.hpp"
#include "gacoop/metrics.hpp"
#include "gacoop/numerics.hpp"
#include "gacoop/objectives.hpp"
#include "gacoop/pipeline.hpp"
#include "gacoop/surrogate.hpp"
#include "gacoop/synthetic.hpp"
#include "gacoop/trainer.hpp"
#include "gacoop/verify.hpp"
