#pragma once

#include "glmh/analysis.hpp"
#include "glmh/batch.hpp"
#include "glmh/cli.hpp"
#include "glmh/diagnostics.hpp"
#include "glmh/error.hpp"
#include "glmh/io.hpp"
#include "glmh/linreg_select.hpp"
#include "glmh/model.hpp"
#include "glmh/newton_gamma.hpp"
#include "glmh/prewhiten.hpp"
#include "glmh/rng.hpp"
#include "glmh/sampler.hpp"
#include "glmh/simulate.hpp"
#include "glmh/wls.hpp"
