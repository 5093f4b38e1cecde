#pragma once

#include "alctl/array_store.hpp"
#include "alctl/config.hpp"
#include "alctl/coreset.hpp"
#include "alctl/errors.hpp"
#include "alctl/evaluator.hpp"
#include "alctl/manifest.hpp"
#include "alctl/pipeline.hpp"
#include "alctl/pooler.hpp"
#include "alctl/sampling.hpp"
#include "alctl/scorer.hpp"
#include "alctl/tiler.hpp"
