#pragma once

#include "caz/activation_store.hpp"
#include "caz/analysis.hpp"
#include "caz/detection.hpp"
#include "caz/error.hpp"
#include "caz/extraction.hpp"
#include "caz/linalg.hpp"
#include "caz/metrics.hpp"
#include "caz/report.hpp"
#include "caz/synth.hpp"
