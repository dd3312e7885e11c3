#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>

namespace gsgraph {

// Global worker count for parallel sections. 0 means hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

// Static-chunked parallel loop. Results must be written to per-index slots
// so reductions stay deterministic regardless of the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Writes via a temp file in the same directory followed by a rename, so a
// crashed run never leaves a half-written output behind.
void atomic_write_file(const std::filesystem::path& path, const std::string& bytes);

std::string to_lower(const std::string& s);

}  // namespace gsgraph
