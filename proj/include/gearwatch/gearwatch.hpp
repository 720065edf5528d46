/**
 * @file gearwatch.hpp
 * @brief Umbrella header.
 */
#pragma once

#include "gearwatch/drift_monitor.hpp"
#include "gearwatch/error.hpp"
#include "gearwatch/mixture_model.hpp"
#include "gearwatch/mode_labeling.hpp"
#include "gearwatch/pipeline.hpp"
#include "gearwatch/ratio_model.hpp"
#include "gearwatch/report.hpp"
#include "gearwatch/scada_ingest.hpp"
#include "gearwatch/synth_data.hpp"
#include "gearwatch/time.hpp"
