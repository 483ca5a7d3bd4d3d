#pragma once

#include "mlcsc/errors.hpp"
#include "mlcsc/tensor.hpp"
#include "mlcsc/windows.hpp"
#include "mlcsc/conv_layer.hpp"
#include "mlcsc/dictionary.hpp"
#include "mlcsc/random.hpp"
#include "mlcsc/parallel.hpp"
#include "mlcsc/pursuit.hpp"
#include "mlcsc/model.hpp"
#include "mlcsc/ml_pursuit.hpp"
#include "mlcsc/analysis.hpp"
#include "mlcsc/learning.hpp"
#include "mlcsc/io.hpp"
#include "mlcsc/experiments.hpp"
