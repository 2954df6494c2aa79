#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tembed/dataset.hpp"
#include "tembed/rng.hpp"

namespace tembed {

/// Sample indices into the dataset. anchor and positive share a class,
/// negative comes from another class, and anchor != positive.
struct Triplet {
    std::size_t anchor = 0;
    std::size_t positive = 0;
    std::size_t negative = 0;

    bool operator==(const Triplet&) const = default;
};

/// max(0, |a - p|^2 - |a - n|^2 + alpha)
double triplet_loss(std::span<const double> a, std::span<const double> p, std::span<const double> n, double alpha);

struct TripletGrads {
    std::vector<double> anchor;
    std::vector<double> positive;
    std::vector<double> negative;
};

/// Gradients of triplet_loss: 2(n - p), -2(a - p), 2(a - n) while the hinge
/// is active (loss > 0), zeros otherwise.
TripletGrads triplet_grads(std::span<const double> a, std::span<const double> p, std::span<const double> n,
                           double alpha);

/// Piecewise-constant margin: entry i applies from its iteration until the next entry.
class MarginSchedule {
public:
    using Entry = std::pair<std::size_t, double>; // (from_iteration, alpha)

    /// Throws std::invalid_argument unless iterations start at 0, strictly
    /// increase, and every alpha is positive.
    explicit MarginSchedule(std::vector<Entry> entries);

    /// 1.0 from iteration 0, 1.3 from 20, 1.5 from 30.
    static MarginSchedule standard();

    /// "0:1.0,20:1.3,30:1.5"
    static MarginSchedule parse(std::string_view text);
    std::string to_string() const;

    const std::vector<Entry>& entries() const { return entries_; }
    bool operator==(const MarginSchedule&) const = default;

private:
    std::vector<Entry> entries_;
};

double margin_at(const MarginSchedule& schedule, std::size_t iteration);

enum class NegativeSampling {
    sample_uniform, // uniform over all training samples of the other classes
    class_uniform,  // uniform over other classes, then uniform within the class
};

std::string_view to_string(NegativeSampling n);
NegativeSampling parse_negative_sampling(std::string_view s);

/// Draws random triplets from the training lists of a Splits.
///
/// The anchor class is uniform over seen classes with at least 2 training
/// samples; the positive is uniform over that class minus the anchor.
class TripletSampler {
public:
    /// Throws DatasetError if no class has 2 training samples or no other
    /// class has any.
    explicit TripletSampler(const Splits& splits, NegativeSampling negatives = NegativeSampling::sample_uniform);

    Triplet sample(Rng& rng) const;

    const std::vector<std::size_t>& eligible_anchor_classes() const { return eligible_; }

private:
    const std::vector<std::vector<std::size_t>>* train_;
    NegativeSampling negatives_;
    std::vector<std::size_t> eligible_;
    std::vector<std::size_t> nonempty_;
    std::size_t total_ = 0;
};

Triplet sample_triplet(const Splits& splits, Rng& rng, NegativeSampling negatives = NegativeSampling::sample_uniform);

} // namespace tembed
