#pragma once

#include "caliblab/error.hpp"
#include "caliblab/geometry.hpp"
#include "caliblab/camera.hpp"
#include "caliblab/principal_line.hpp"
#include "caliblab/calibrate.hpp"
#include "caliblab/refine.hpp"
#include "caliblab/parallel.hpp"
#include "caliblab/scene.hpp"
#include "caliblab/evaluation.hpp"
#include "caliblab/io.hpp"
