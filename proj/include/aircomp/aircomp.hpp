#pragma once

#include "aircomp/airsim.hpp"
#include "aircomp/anneal.hpp"
#include "aircomp/cccp.hpp"
#include "aircomp/design_io.hpp"
#include "aircomp/funcspec.hpp"
#include "aircomp/geometry.hpp"
#include "aircomp/oracle.hpp"
#include "aircomp/partition.hpp"
#include "aircomp/pipeline.hpp"
#include "aircomp/subsolver.hpp"
