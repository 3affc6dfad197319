#pragma once

// Single include for the whole toolkit.

#include "awm/attack.hpp"
#include "awm/cli.hpp"
#include "awm/config.hpp"
#include "awm/core.hpp"
#include "awm/corpus.hpp"
#include "awm/embedder.hpp"
#include "awm/errors.hpp"
#include "awm/experiment.hpp"
#include "awm/io.hpp"
#include "awm/kgw.hpp"
#include "awm/mapper.hpp"
#include "awm/mapper_train.hpp"
#include "awm/metrics.hpp"
#include "awm/ngram.hpp"
#include "awm/rng.hpp"
#include "awm/vocab.hpp"
#include "awm/watermark.hpp"
