#pragma once

// Recloser time-current inverse curves and tabulated fuse curves.
//
// Currents are per-unit on the network's three-phase current base; times are
// seconds. Curve evaluation never throws for out-of-region currents: a device
// that does not operate yields CurveStatus::NoOperation with infinite time.

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace protcoord {

/// Constants of T = a*D / ((I/Ip)^m - c) + b*D + K.
struct TCIConstants {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double m = 1.0;
    double k = 0.0;

    friend bool operator==(const TCIConstants&, const TCIConstants&) = default;
};

struct RecloserSettings {
    double pickup = 1.0;     // per-unit current
    double time_dial = 0.1;  // dimensionless, admissible range [0.1, 1]

    friend bool operator==(const RecloserSettings&, const RecloserSettings&) = default;
};

inline constexpr double kMinTimeDial = 0.1;
inline constexpr double kMaxTimeDial = 1.0;

enum class CurveStatus {
    Operates,
    NoOperation,   // below pickup region / below the first tabulated fuse point
    Extrapolated,  // fuse queried beyond its last tabulated point
};

struct CurveTime {
    double seconds = std::numeric_limits<double>::infinity();
    CurveStatus status = CurveStatus::NoOperation;

    bool operates() const noexcept { return status != CurveStatus::NoOperation; }
    static CurveTime no_operation() noexcept { return {}; }
};

/// Time-dial independent part of the TCI curve: a / ((I/Ip)^m - c) + b.
/// Empty when the current is at or below the pickup-region boundary.
std::optional<double> tci_dial_factor(const TCIConstants& curve, double pickup, double current);

CurveTime tci_time(const TCIConstants& curve, const RecloserSettings& settings, double current);

/// Closed-form inverse of tci_time. Throws UnreachableTimeError when
/// t_target <= b*D + K (the curve's high-current asymptote).
double invert_tci_for_current(const TCIConstants& curve, const RecloserSettings& settings,
                              double t_target);

std::vector<std::string> validate_tci_constants(const TCIConstants& curve);

enum class ShotSpeed { Fast, Slow };

struct TripShot {
    ShotSpeed speed = ShotSpeed::Fast;
    std::string family;  // name of the curve family the constants came from
    TCIConstants curve;
    RecloserSettings settings;
};

/// Ordered trip shots of a recloser, e.g. fast-fast-slow. A feeder-head relay
/// is a sequence with slow shots only.
struct ReclosingSequence {
    std::vector<TripShot> shots;

    /// "FFS"-style pattern string.
    std::string pattern() const;
    const TripShot& first() const;
    TripShot& first();
    const TripShot* first_slow() const;
    bool has_fast() const;

    /// Sets pickup on every shot and the time dial of every shot sharing the
    /// first shot's speed.
    void apply_first_curve_settings(const RecloserSettings& settings);
};

struct CurvePoint {
    double current = 0.0;
    double seconds = 0.0;
};

enum class FuseCharacteristic { MinimumMelting, TotalClearing };

struct FuseCurve {
    std::string id;
    std::vector<CurvePoint> minimum_melting;
    std::vector<CurvePoint> total_clearing;

    const std::vector<CurvePoint>& points(FuseCharacteristic which) const {
        return which == FuseCharacteristic::MinimumMelting ? minimum_melting : total_clearing;
    }
};

std::vector<std::string> validate_fuse_curve(const FuseCurve& curve);

/// Log-log piecewise-linear interpolation of the tabulated characteristic.
/// Below the first point the fuse does not melt; above the last point the
/// last segment is continued and the result flagged Extrapolated.
CurveTime fuse_time(const FuseCurve& curve, FuseCharacteristic which, double current);

/// Inverse of fuse_time, including the extrapolated last segment. Throws
/// UnreachableTimeError when t_target exceeds the slowest tabulated time.
double fuse_current_for_time(const FuseCurve& curve, FuseCharacteristic which, double t_target);

/// Scales every tabulated current by `factor` (ampere tables to per-unit).
FuseCurve scale_fuse_currents(FuseCurve curve, double factor);

/// Named TCI constant sets loaded from the versioned curve-family file.
struct CurveFamilies {
    int version = 0;
    std::map<std::string, TCIConstants> families;

    const TCIConstants& at(const std::string& name) const;
};

}  // namespace protcoord
