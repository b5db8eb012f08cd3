#pragma once

#include "tripdist/config.hpp"
#include "tripdist/data.hpp"
#include "tripdist/errors.hpp"
#include "tripdist/eval.hpp"
#include "tripdist/io.hpp"
#include "tripdist/loss.hpp"
#include "tripdist/model.hpp"
#include "tripdist/numerics.hpp"
#include "tripdist/pipeline.hpp"
#include "tripdist/teacher.hpp"
#include "tripdist/trainer.hpp"
