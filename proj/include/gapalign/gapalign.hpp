#pragma once

#include "gapalign/core.hpp"
#include "gapalign/dualspace.hpp"
#include "gapalign/encoder.hpp"
#include "gapalign/gapmetrics.hpp"
#include "gapalign/graphdata.hpp"
#include "gapalign/monitor.hpp"
#include "gapalign/objectives.hpp"
#include "gapalign/text_io.hpp"
#include "gapalign/trainer.hpp"
