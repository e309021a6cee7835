#pragma once

#include "archetypes.hpp"
#include "common.hpp"
#include "config.hpp"
#include "core_model.hpp"
#include "csv.hpp"
#include "dbscan.hpp"
#include "grouping.hpp"
#include "hdbscan.hpp"
#include "io.hpp"
#include "kmeans.hpp"
#include "metrics.hpp"
#include "nmf.hpp"
#include "persist.hpp"
#include "projection.hpp"
#include "session.hpp"
#include "silhouette.hpp"
#include "sweep.hpp"
#include "synthetic.hpp"
#include "text.hpp"
#include "transitions.hpp"
#include "uncertainty.hpp"
