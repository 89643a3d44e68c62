#ifndef AICLAB_AICLAB_HPP
#define AICLAB_AICLAB_HPP

#include "aiclab/errors.hpp"
#include "aiclab/flow.hpp"
#include "aiclab/geometry.hpp"
#include "aiclab/io.hpp"
#include "aiclab/landscape.hpp"
#include "aiclab/linalg.hpp"
#include "aiclab/nullmodel.hpp"
#include "aiclab/parallel.hpp"
#include "aiclab/policy.hpp"
#include "aiclab/random.hpp"
#include "aiclab/scaling.hpp"
#include "aiclab/serialize.hpp"
#include "aiclab/sketch.hpp"

#endif  // AICLAB_AICLAB_HPP
