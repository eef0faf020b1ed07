#pragma once

#include "error.hpp"
#include "parallel.hpp"
#include "sphere_geom.hpp"
#include "raster.hpp"
#include "equirect_remap.hpp"
#include "tangent_proj.hpp"
#include "flow_io.hpp"
#include "image_io.hpp"
#include "flow_vis.hpp"
#include "metrics.hpp"
#include "stats.hpp"
#include "siamese.hpp"
#include "variational.hpp"
#include "pano_pipeline.hpp"
#include "synth.hpp"
#include "report_json.hpp"
