#ifndef DRBENCH_DRBENCH_HPP
#define DRBENCH_DRBENCH_HPP

#include "drbench/corpus_io.hpp"
#include "drbench/embed.hpp"
#include "drbench/error.hpp"
#include "drbench/metrics.hpp"
#include "drbench/perturb.hpp"
#include "drbench/report.hpp"
#include "drbench/retrieval.hpp"
#include "drbench/rng.hpp"
#include "drbench/runner.hpp"
#include "drbench/service.hpp"
#include "drbench/store.hpp"
#include "drbench/tokenizer.hpp"

#endif  // DRBENCH_DRBENCH_HPP
