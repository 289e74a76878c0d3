#pragma once

// Fuse-recloser and recloser-recloser coordination checks.
//
// A pair is checked over a sweep of primary-device currents. The backup sees
// the primary current shifted by the pair's disparity: I_B = I_P + offset,
// with offset = +dI_FR for fuse-saving pairs (the fuse also carries the DG
// downstream of the recloser) and -dI_RR for recloser pairs (the upstream
// recloser misses the DG between the two).

#include "protcoord/protection_curves.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace protcoord {

struct RecloserCurve {
    std::size_t recloser_id = 0;
    std::string label;
    TCIConstants curve;
    RecloserSettings settings;
};

struct FuseDevice {
    std::size_t lateral_id = 0;
    std::string label;
    FuseCurve curve;
    FuseCharacteristic which = FuseCharacteristic::MinimumMelting;
};

using DeviceCurve = std::variant<RecloserCurve, FuseDevice>;

CurveTime device_time(const DeviceCurve& device, double current);

/// Current at which the device operates in t_target seconds. Throws
/// UnreachableTimeError naming the device when no such current exists.
double device_current_for_time(const DeviceCurve& device, double t_target);

const std::string& device_label(const DeviceCurve& device);

enum class PairKind { FuseRecloser, RecloserRecloser };

struct CurrentRange {
    double lo = 0.0;
    double hi = 0.0;
};

struct CoordinationPair {
    std::string label;
    PairKind kind = PairKind::FuseRecloser;
    DeviceCurve primary;
    DeviceCurve backup;
    double margin = 0.1;  // required gap T_B - T_P, seconds
    CurrentRange range;   // admissible fault currents for either device
};

struct CurrentSweep {
    std::vector<double> primary_currents;  // increasing
    double backup_offset = 0.0;            // I_B = I_P + backup_offset
};

/// Logarithmic grid over [lo, hi] with at least `points_per_decade` points
/// per decade; both endpoints included.
CurrentSweep log_sweep(double lo, double hi, int points_per_decade, double backup_offset);

struct CoordinationOptions {
    int points_per_decade = 200;
    /// Quantify primary and backup currents independently over the range
    /// instead of linking them through the disparity (stricter).
    bool independent_currents = false;
};

enum class FailureMode { None, RangeExceeded, MarginViolated };

const char* to_string(FailureMode mode);

struct SweepSample {
    double i_primary = 0.0;
    double i_backup = 0.0;
    double t_primary = 0.0;
    double t_backup = 0.0;
};

struct CoordinationReport {
    std::string pair_label;
    PairKind kind = PairKind::FuseRecloser;
    bool range_ok = false;
    bool margin_ok = false;
    double worst_margin = 0.0;   // min over the sweep of T_B - T_P
    double worst_current = 0.0;  // primary current where it occurs
    FailureMode failure_mode = FailureMode::None;
    std::string trigger;         // violated inequality, human readable
    std::optional<double> backup_delay;  // recloser pairs: T_B - T_P at the top of the sweep
    std::vector<SweepSample> samples;
};

/// Throws SweepGapError when consecutive sweep currents are further apart
/// than the configured resolution allows.
CoordinationReport check_pair(const CoordinationPair& pair, const CurrentSweep& sweep,
                              const CoordinationOptions& options = {});

/// T_B(I + delta) - T_B(I) for the pair's backup curve. Empty when the backup
/// does not operate at either current.
std::optional<double> backup_delay(const CoordinationPair& pair, double delta, double i_primary);

/// Largest backup-current offset that still leaves a gap of delta_t at the
/// binding primary current: I_B* - i_binding where T_B(I_B*) = T_P(i_binding) + delta_t.
double coordination_current_margin(const CoordinationPair& pair, double delta_t,
                                   double i_binding);

}  // namespace protcoord
