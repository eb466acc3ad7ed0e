#pragma once

#include "shotclust/active.hpp"
#include "shotclust/classifier.hpp"
#include "shotclust/cluster.hpp"
#include "shotclust/corpus.hpp"
#include "shotclust/error.hpp"
#include "shotclust/features.hpp"
#include "shotclust/gbt.hpp"
#include "shotclust/hash.hpp"
#include "shotclust/hog.hpp"
#include "shotclust/image.hpp"
#include "shotclust/matrix.hpp"
#include "shotclust/pipeline.hpp"
#include "shotclust/propagate.hpp"
#include "shotclust/random.hpp"
#include "shotclust/reduce.hpp"
#include "shotclust/report.hpp"
#include "shotclust/session.hpp"
#include "shotclust/svm.hpp"
#include "shotclust/text.hpp"
#include "shotclust/validity.hpp"
