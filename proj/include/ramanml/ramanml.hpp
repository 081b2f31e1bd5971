#pragma once

// Umbrella header: concentration-class prediction from raw SERS spectra via
// frequency-domain transforms and from-scratch classifiers.

#include "ramanml/augment.hpp"
#include "ramanml/dataset.hpp"
#include "ramanml/errors.hpp"
#include "ramanml/eval.hpp"
#include "ramanml/matrix.hpp"
#include "ramanml/models/forest.hpp"
#include "ramanml/models/knn.hpp"
#include "ramanml/models/model.hpp"
#include "ramanml/models/svc.hpp"
#include "ramanml/nn.hpp"
#include "ramanml/peaks.hpp"
#include "ramanml/presets.hpp"
#include "ramanml/report.hpp"
#include "ramanml/rng.hpp"
#include "ramanml/transform.hpp"
