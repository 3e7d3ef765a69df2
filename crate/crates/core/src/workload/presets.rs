//! The five baseline applications and their mixed combination.

use super::{Activity, ApplicationSpec, ContainerConfig, Pattern};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown preset `{0}` (expected S1..S5 or mixed)")]
pub struct UnknownPreset(pub String);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    S1,
    S2,
    S3,
    S4,
    S5,
    Mixed,
}

impl Preset {
    pub const ALL: [Preset; 6] = [Preset::S1, Preset::S2, Preset::S3, Preset::S4, Preset::S5, Preset::Mixed];

    pub fn name(self) -> &'static str {
        match self {
            Preset::S1 => "S1",
            Preset::S2 => "S2",
            Preset::S3 => "S3",
            Preset::S4 => "S4",
            Preset::S5 => "S5",
            Preset::Mixed => "mixed",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = UnknownPreset;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "s1" | "smart_city" => Ok(Preset::S1),
            "s2" | "e_health" => Ok(Preset::S2),
            "s3" | "smart_building" => Ok(Preset::S3),
            "s4" | "sports_streaming" => Ok(Preset::S4),
            "s5" | "video_gaming" => Ok(Preset::S5),
            "mixed" => Ok(Preset::Mixed),
            _ => Err(UnknownPreset(s.to_string())),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn app(
    name: &str,
    users: u32,
    rate: f64,
    slo: f64,
    mi: f64,
    req_kb: f64,
    resp_kb: f64,
    pattern: Pattern,
) -> ApplicationSpec {
    ApplicationSpec {
        name: name.to_string(),
        users,
        task_rate_per_min: rate,
        max_latency_s: slo,
        task_length_mi: mi,
        request_kb: req_kb,
        response_kb: resp_kb,
        container: ContainerConfig::default(),
        pattern,
        activity: Activity::default(),
    }
}

pub fn smart_city() -> ApplicationSpec {
    app("smart_city", 128, 2.0, 0.5, 500.0, 1.0, 10.0, Pattern::Periodic { period_s: None })
}

pub fn e_health() -> ApplicationSpec {
    app("e_health", 10, 60.0, 0.05, 1000.0, 10.0, 10.0, Pattern::Periodic { period_s: None })
}

pub fn smart_building() -> ApplicationSpec {
    app("smart_building", 20, 60.0, 0.2, 5000.0, 750.0, 500.0, Pattern::Periodic { period_s: None })
}

/// Bursts of 5 tasks every 15 s keep the 20 tasks/min mean rate.
pub fn sports_streaming() -> ApplicationSpec {
    app(
        "sports_streaming",
        60,
        20.0,
        0.5,
        5000.0,
        750.0,
        500.0,
        Pattern::Bursty {
            burst_size: 5,
            burst_interval_s: 15.0,
        },
    )
}

pub fn video_gaming() -> ApplicationSpec {
    app("video_gaming", 80, 180.0, 0.05, 100.0, 10.0, 10.0, Pattern::Random)
}

/// Applications of a preset with their default replica counts.
pub fn build_preset(preset: Preset) -> Vec<ApplicationSpec> {
    let single = |mut a: ApplicationSpec| {
        a.container.replicas = SINGLE_APP_REPLICAS;
        vec![a]
    };
    match preset {
        Preset::S1 => single(smart_city()),
        Preset::S2 => single(e_health()),
        Preset::S3 => single(smart_building()),
        Preset::S4 => single(sports_streaming()),
        Preset::S5 => single(video_gaming()),
        Preset::Mixed => [smart_city(), e_health(), smart_building(), sports_streaming(), video_gaming()]
            .into_iter()
            .map(|mut a| {
                a.container.replicas = MIXED_REPLICAS;
                a
            })
            .collect(),
    }
}

/// Replicas per application in single-application presets.
pub const SINGLE_APP_REPLICAS: u32 = 4;
/// Replicas per application in the mixed preset.
pub const MIXED_REPLICAS: u32 = 21;
