#pragma once

#include "desirelines/compliance.hpp"
#include "desirelines/core.hpp"
#include "desirelines/endpoint_cluster.hpp"
#include "desirelines/error.hpp"
#include "desirelines/export.hpp"
#include "desirelines/ingest.hpp"
#include "desirelines/path_cluster.hpp"
#include "desirelines/pipeline.hpp"
#include "desirelines/preprocess.hpp"
#include "desirelines/synth.hpp"
