// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#include "skelbox/error.hpp"

#include <atomic>
#include <iostream>

namespace skelbox {
namespace {

void stderr_sink(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

std::atomic<WarningSink> g_sink{&stderr_sink};

}  // namespace

void set_warning_sink(WarningSink sink) { g_sink.store(sink ? sink : &stderr_sink); }

void warn(const std::string& message) { g_sink.load()(message); }

}  // namespace skelbox
