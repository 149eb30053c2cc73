#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace incv {

// Error taxonomy shared by every module. Callers (the CLI) map these onto exit codes.

/// A precondition of an operation was violated by the caller.
struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

/// Well-formed call, but the data itself is unacceptable (zero income, bad state code, ...).
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const char* what) {
    if (!cond) throw ContractViolation(what);
}

// ---------------------------------------------------------------------------
// Money

/// Non-negative amount of US dollars held as integer cents.
class Money {
public:
    constexpr Money() = default;

    static Money from_cents(std::int64_t cents) {
        if (cents < 0) throw InputError("money amount must be non-negative");
        Money m;
        m.cents_ = cents;
        return m;
    }

    static Money from_dollars(double dollars) {
        if (!std::isfinite(dollars) || dollars < 0.0) throw InputError("money amount must be finite and non-negative");
        const double c = std::round(dollars * 100.0);
        if (c >= 9.2e18) throw std::overflow_error("money amount overflows");
        return from_cents(static_cast<std::int64_t>(c));
    }

    constexpr std::int64_t cents() const { return cents_; }
    constexpr double dollars() const { return static_cast<double>(cents_) / 100.0; }
    constexpr bool is_zero() const { return cents_ == 0; }

    Money operator+(Money o) const {
        std::int64_t r;
        if (__builtin_add_overflow(cents_, o.cents_, &r)) throw std::overflow_error("money addition overflows");
        return from_cents(r);
    }

    Money operator-(Money o) const {
        if (o.cents_ > cents_) throw InputError("money subtraction would go negative");
        return from_cents(cents_ - o.cents_);
    }

    Money scaled(std::int64_t k) const {
        std::int64_t r;
        if (k < 0 || __builtin_mul_overflow(cents_, k, &r)) throw std::overflow_error("money scaling overflows");
        return from_cents(r);
    }

    /// Plain dollars with two decimals, e.g. "73482.00".
    std::string str() const {
        std::string s = std::to_string(cents_ / 100);
        const auto c = cents_ % 100;
        s += '.';
        s += static_cast<char>('0' + c / 10);
        s += static_cast<char>('0' + c % 10);
        return s;
    }

    friend constexpr auto operator<=>(Money, Money) = default;

private:
    std::int64_t cents_ = 0;
};

inline Money operator""_usd(unsigned long long dollars) {
    return Money::from_cents(static_cast<std::int64_t>(dollars) * 100);
}

// ---------------------------------------------------------------------------
// States

inline constexpr std::array<std::string_view, 50> kStates = {
    "AL", "AK", "AZ", "AR", "CA", "CO", "CT", "DE", "FL", "GA", "HI", "ID", "IL", "IN", "IA", "KS", "KY",
    "LA", "ME", "MD", "MA", "MI", "MN", "MS", "MO", "MT", "NE", "NV", "NH", "NJ", "NM", "NY", "NC", "ND",
    "OH", "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX", "UT", "VT", "VA", "WA", "WV", "WI", "WY"};

inline constexpr std::array<std::string_view, 6> kTerritories = {"DC", "PR", "GU", "VI", "AS", "MP"};

/// Slot of a state in the 50-wide one-hot encoding; territories and unknown codes have no slot.
inline std::optional<std::size_t> state_slot(std::string_view code) {
    for (std::size_t i = 0; i < kStates.size(); ++i)
        if (kStates[i] == code) return i;
    return std::nullopt;
}

inline bool is_known_state_code(std::string_view code) {
    return state_slot(code).has_value() ||
           std::find(kTerritories.begin(), kTerritories.end(), code) != kTerritories.end();
}

// ---------------------------------------------------------------------------
// Identity

struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    static std::optional<Date> parse(std::string_view iso) {
        // YYYY-MM-DD
        if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
        Date d;
        auto num = [&](std::size_t off, std::size_t len, int& out) {
            auto r = std::from_chars(iso.data() + off, iso.data() + off + len, out);
            return r.ec == std::errc{} && r.ptr == iso.data() + off + len;
        };
        if (!num(0, 4, d.year) || !num(5, 2, d.month) || !num(8, 2, d.day)) return std::nullopt;
        if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) return std::nullopt;
        return d;
    }

    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    friend bool operator==(const Date&, const Date&) = default;
};

struct PersonName {
    std::string first;
    std::optional<std::string> middle;
    std::string last;

    std::string full() const {
        std::string s = first;
        if (middle && !middle->empty()) s += " " + *middle;
        if (!last.empty()) s += " " + last;
        return s;
    }

    /// Splits "First [Middle ...] Last" on whitespace.
    static PersonName parse(std::string_view text) {
        std::vector<std::string> toks;
        std::string cur;
        for (char c : text) {
            if (c == ' ' || c == '\t') {
                if (!cur.empty()) toks.push_back(std::move(cur)), cur.clear();
            } else {
                cur += c;
            }
        }
        if (!cur.empty()) toks.push_back(std::move(cur));
        PersonName n;
        if (toks.empty()) return n;
        n.first = toks.front();
        if (toks.size() >= 2) n.last = toks.back();
        if (toks.size() >= 3) {
            std::string mid;
            for (std::size_t i = 1; i + 1 < toks.size(); ++i) mid += (mid.empty() ? "" : " ") + toks[i];
            n.middle = mid;
        }
        return n;
    }

    friend bool operator==(const PersonName&, const PersonName&) = default;
};

struct Address {
    std::optional<std::string> street;
    std::optional<std::string> city;
    std::optional<std::string> county;
    std::optional<std::string> state;
    std::optional<std::string> zip;
    std::optional<std::string> country;

    friend bool operator==(const Address&, const Address&) = default;
};

/// One input row: who the person is, where they work, what they claim to earn.
struct Identity {
    std::string id;  // row key; never used as a model feature
    PersonName name;
    Address address;
    std::optional<Date> dob;
    std::string employer;
    std::string job_title;
    std::optional<Money> stated_income;

    /// Throws InputError when an invariant does not hold.
    void validate() const {
        if (employer.empty()) throw InputError("identity " + id + ": employer is empty");
        if (job_title.empty()) throw InputError("identity " + id + ": job_title is empty");
        if (stated_income && stated_income->is_zero())
            throw InputError("identity " + id + ": stated income must be positive");
        if (address.state && !address.state->empty() && !is_known_state_code(*address.state))
            throw InputError("identity " + id + ": unknown state code '" + *address.state + "'");
    }

    friend bool operator==(const Identity&, const Identity&) = default;
};

/// The only view of an identity that model-feature builders accept: no name, dob, street or zip.
struct RedactedIdentity {
    std::string employer;
    std::string job_title;
    std::string city;
    std::string state;

    static RedactedIdentity of(const Identity& id) {
        return {id.employer, id.job_title, id.address.city.value_or(""), id.address.state.value_or("")};
    }

    friend bool operator==(const RedactedIdentity&, const RedactedIdentity&) = default;
};

// ---------------------------------------------------------------------------
// Metrics

struct MetricsReport {
    double mae = 0.0;  // dollars
    double mre = 0.0;
    std::size_t n = 0;
};

/// MAE in dollars and MRE = mean(|p - a| / a).
inline MetricsReport compute_metrics(std::span<const Money> predictions, std::span<const Money> actuals) {
    if (predictions.size() != actuals.size()) throw ContractViolation("compute_metrics: length mismatch");
    if (predictions.empty()) throw ContractViolation("compute_metrics: empty input");
    double abs_sum = 0.0;
    double rel_sum = 0.0;
    for (std::size_t i = 0; i < actuals.size(); ++i) {
        if (actuals[i].is_zero()) throw InputError("compute_metrics: actual income of zero");
        const double a = actuals[i].dollars();
        const double err = std::abs(predictions[i].dollars() - a);
        abs_sum += err;
        rel_sum += err / a;
    }
    const auto n = static_cast<double>(actuals.size());
    return {abs_sum / n, rel_sum / n, actuals.size()};
}

struct DatasetStats {
    std::size_t size = 0;
    double mean = 0.0;
    double stddev = 0.0;  // sample (n - 1)
    double skew = 0.0;    // biased g1
    bool degenerate = false;  // n < 2: stddev and skew reported as 0
};

inline DatasetStats dataset_stats(std::span<const Money> incomes) {
    if (incomes.empty()) throw ContractViolation("dataset_stats: empty input");
    DatasetStats s;
    s.size = incomes.size();
    const auto n = static_cast<double>(incomes.size());
    double sum = 0.0;
    for (auto m : incomes) sum += m.dollars();
    s.mean = sum / n;
    if (incomes.size() < 2) {
        s.degenerate = true;
        return s;
    }
    double m2 = 0.0, m3 = 0.0;
    for (auto m : incomes) {
        const double d = m.dollars() - s.mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    s.stddev = std::sqrt(m2 / (n - 1.0));
    m2 /= n;
    m3 /= n;
    s.skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    return s;
}

}  // namespace incv
