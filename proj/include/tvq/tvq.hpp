#pragma once

#include "tvq/analysis.hpp"
#include "tvq/artifact.hpp"
#include "tvq/bitpack.hpp"
#include "tvq/container.hpp"
#include "tvq/digest.hpp"
#include "tvq/error.hpp"
#include "tvq/merge.hpp"
#include "tvq/named_map.hpp"
#include "tvq/parallel.hpp"
#include "tvq/quantizer.hpp"
#include "tvq/report.hpp"
#include "tvq/rtvq.hpp"
#include "tvq/synth.hpp"
#include "tvq/taskvec.hpp"
#include "tvq/tensor_map.hpp"
