#pragma once

#include "tipgen/error.hpp"
#include "tipgen/raster.hpp"
#include "tipgen/morphology.hpp"
#include "tipgen/threat.hpp"
#include "tipgen/placement.hpp"
#include "tipgen/compositor.hpp"
#include "tipgen/coco.hpp"
#include "tipgen/dataset.hpp"
#include "tipgen/evaluation.hpp"
