#pragma once

#include "curriculum/competence.hpp"
#include "curriculum/config.hpp"
#include "curriculum/corpus.hpp"
#include "curriculum/difficulty.hpp"
#include "curriculum/error.hpp"
#include "curriculum/learner.hpp"
#include "curriculum/metric.hpp"
#include "curriculum/random.hpp"
#include "curriculum/scheduler.hpp"
#include "curriculum/trace.hpp"
