/**
 * @file query_generator.hpp
 * @brief Seeded random Formal Query generation for oracle workloads
 *
 * Literal values are drawn from the records the queries will run against, so
 * most generated constraints select a non-trivial subset. All randomness goes
 * through a raw mt19937_64 with modulo mapping, which keeps workloads
 * identical across standard library implementations.
 */

#ifndef GRIDBOX_HARNESS_QUERY_GENERATOR_HPP
#define GRIDBOX_HARNESS_QUERY_GENERATOR_HPP

#include "gridbox/formal_query.hpp"

#include <random>
#include <span>

namespace gridbox::harness {

struct query_shape {
    std::size_t max_constraints = 4;
    std::size_t max_order_keys = 2;
    int order_percent = 50;   ///< chance of a QueryOrder
    int limit_percent = 40;   ///< chance of a QueryLimit
    int offset_percent = 50;  ///< chance of an offset, given a limit
    std::int64_t max_limit = 25;
    std::int64_t max_offset = 12;
};

[[nodiscard]] fq::formal_query random_query(std::mt19937_64& rng, std::span<const fq::metadata_record> records,
                                            const query_shape& shape = {});

}  // namespace gridbox::harness

#endif  // GRIDBOX_HARNESS_QUERY_GENERATOR_HPP
