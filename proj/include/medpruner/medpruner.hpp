#pragma once
// Umbrella header: adaptive two-stage token pruning for 3D volumes.

#include "medpruner/core.hpp"
#include "medpruner/dins.hpp"
#include "medpruner/iaf.hpp"
#include "medpruner/merge.hpp"
#include "medpruner/pipeline.hpp"
#include "medpruner/saliency.hpp"
#include "medpruner/synth.hpp"
#include "medpruner/tensor_io.hpp"
