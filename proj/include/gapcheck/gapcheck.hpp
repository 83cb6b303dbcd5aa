#pragma once

// Umbrella header.

#include "gapcheck/baselines.hpp"
#include "gapcheck/cli.hpp"
#include "gapcheck/consensus.hpp"
#include "gapcheck/datasets.hpp"
#include "gapcheck/errors.hpp"
#include "gapcheck/eval.hpp"
#include "gapcheck/gateway.hpp"
#include "gapcheck/identify.hpp"
#include "gapcheck/openai_backend.hpp"
#include "gapcheck/pipeline.hpp"
#include "gapcheck/report.hpp"
#include "gapcheck/templates.hpp"
#include "gapcheck/verify.hpp"
