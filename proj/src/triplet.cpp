#include "tembed/triplet.hpp"

#include <algorithm>
#include <stdexcept>

#include "tembed/error.hpp"
#include "tembed/tsv.hpp"

namespace tembed {

namespace {

void check_dims(std::span<const double> a, std::span<const double> p, std::span<const double> n) {
    if (a.size() != p.size() || a.size() != n.size()) {
        throw StructuralError("triplet: embedding dimensions differ (" + std::to_string(a.size()) + ", " +
                              std::to_string(p.size()) + ", " + std::to_string(n.size()) + ")");
    }
}

} // namespace

double triplet_loss(std::span<const double> a, std::span<const double> p, std::span<const double> n, double alpha) {
    check_dims(a, p, n);
    double ap = 0.0;
    double an = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ap += (a[i] - p[i]) * (a[i] - p[i]);
        an += (a[i] - n[i]) * (a[i] - n[i]);
    }
    return std::max(0.0, ap - an + alpha);
}

TripletGrads triplet_grads(std::span<const double> a, std::span<const double> p, std::span<const double> n,
                           double alpha) {
    TripletGrads g{std::vector<double>(a.size(), 0.0), std::vector<double>(a.size(), 0.0),
                   std::vector<double>(a.size(), 0.0)};
    if (triplet_loss(a, p, n, alpha) <= 0.0) return g;
    for (std::size_t i = 0; i < a.size(); ++i) {
        g.anchor[i] = 2.0 * (n[i] - p[i]);
        g.positive[i] = -2.0 * (a[i] - p[i]);
        g.negative[i] = 2.0 * (a[i] - n[i]);
    }
    return g;
}

MarginSchedule::MarginSchedule(std::vector<Entry> entries) : entries_(std::move(entries)) {
    if (entries_.empty() || entries_.front().first != 0) {
        throw std::invalid_argument("margin schedule must start at iteration 0");
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (!(entries_[i].second > 0.0)) throw std::invalid_argument("margin values must be positive");
        if (i > 0 && entries_[i].first <= entries_[i - 1].first) {
            throw std::invalid_argument("margin schedule iterations must strictly increase");
        }
    }
}

MarginSchedule MarginSchedule::standard() { return MarginSchedule({{0, 1.0}, {20, 1.3}, {30, 1.5}}); }

MarginSchedule MarginSchedule::parse(std::string_view text) {
    std::vector<Entry> entries;
    while (!text.empty()) {
        const auto comma = text.find(',');
        const auto item = text.substr(0, comma);
        const auto colon = item.find(':');
        if (colon == std::string_view::npos) {
            throw std::invalid_argument("margin entry '" + std::string(item) + "' is not iteration:alpha");
        }
        const double from = parse_double(item.substr(0, colon));
        if (from < 0 || from != static_cast<double>(static_cast<std::size_t>(from))) {
            throw std::invalid_argument("margin iteration must be a nonnegative integer");
        }
        entries.emplace_back(static_cast<std::size_t>(from), parse_double(item.substr(colon + 1)));
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    return MarginSchedule(std::move(entries));
}

std::string MarginSchedule::to_string() const {
    std::string s;
    for (const auto& [from, alpha] : entries_) {
        if (!s.empty()) s += ",";
        std::string a = format_double(alpha);
        if (a.find_first_of(".en") == std::string::npos) a += ".0";
        s += std::to_string(from) + ":" + a;
    }
    return s;
}

double margin_at(const MarginSchedule& schedule, std::size_t iteration) {
    double alpha = schedule.entries().front().second;
    for (const auto& [from, a] : schedule.entries()) {
        if (from > iteration) break;
        alpha = a;
    }
    return alpha;
}

std::string_view to_string(NegativeSampling n) {
    return n == NegativeSampling::sample_uniform ? "sample" : "class";
}

NegativeSampling parse_negative_sampling(std::string_view s) {
    if (s == "sample") return NegativeSampling::sample_uniform;
    if (s == "class") return NegativeSampling::class_uniform;
    throw std::invalid_argument("unknown negative sampling '" + std::string(s) + "' (expected sample or class)");
}

TripletSampler::TripletSampler(const Splits& splits, NegativeSampling negatives)
    : train_(&splits.train), negatives_(negatives) {
    for (std::size_t c = 0; c < splits.train.size(); ++c) {
        if (splits.train[c].size() >= 2) eligible_.push_back(c);
        if (!splits.train[c].empty()) nonempty_.push_back(c);
        total_ += splits.train[c].size();
    }
    if (eligible_.empty()) throw DatasetError("triplet sampling: no class has at least 2 training samples");
    if (nonempty_.size() < 2) throw DatasetError("triplet sampling: need training samples from at least 2 classes");
}

Triplet TripletSampler::sample(Rng& rng) const {
    const auto& train = *train_;
    const std::size_t cls = eligible_[rng.index(eligible_.size())];
    const auto& members = train[cls];

    const std::size_t ai = rng.index(members.size());
    std::size_t pi = rng.index(members.size() - 1);
    if (pi >= ai) ++pi;

    std::size_t negative = 0;
    if (negatives_ == NegativeSampling::sample_uniform) {
        std::size_t r = rng.index(total_ - members.size());
        for (std::size_t c = 0; c < train.size(); ++c) {
            if (c == cls) continue;
            if (r < train[c].size()) {
                negative = train[c][r];
                break;
            }
            r -= train[c].size();
        }
    } else {
        // The anchor class is always in nonempty_; draw among the others.
        const auto self = static_cast<std::size_t>(
            std::lower_bound(nonempty_.begin(), nonempty_.end(), cls) - nonempty_.begin());
        std::size_t pick = rng.index(nonempty_.size() - 1);
        if (pick >= self) ++pick;
        const auto& other = train[nonempty_[pick]];
        negative = other[rng.index(other.size())];
    }
    return {members[ai], members[pi], negative};
}

Triplet sample_triplet(const Splits& splits, Rng& rng, NegativeSampling negatives) {
    return TripletSampler(splits, negatives).sample(rng);
}

} // namespace tembed
