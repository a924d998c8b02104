use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;

use dragkit_core::HarnessConfig;

pub const DEFAULT_PORT: u16 = 8750;
pub const DEFAULT_MAX_IMAGE_AREA: usize = 4096 * 4096;
/// Request body cap; a 4096x4096 PPM is about 48 MiB.
pub const DEFAULT_BODY_LIMIT: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub host: IpAddr,
    pub port: u16,
    pub data_dir: PathBuf,
    pub max_image_area: usize,
    pub body_limit: usize,
    /// Allowed browser origins. Empty allows any origin.
    pub cors_origins: Vec<String>,
    /// Harness settings for edits that request a trace.
    pub harness: HarnessConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            data_dir: PathBuf::from("dragkit-data"),
            max_image_area: DEFAULT_MAX_IMAGE_AREA,
            body_limit: DEFAULT_BODY_LIMIT,
            cors_origins: Vec::new(),
            harness: HarnessConfig::default(),
        }
    }
}

impl ServiceConfig {
    /// Defaults overridden by `DK_PORT`, `DK_HOST`, `DK_DATA_DIR`,
    /// `DK_CORS_ORIGINS` (comma separated) and `DK_MAX_IMAGE_AREA`.
    pub fn from_env() -> Result<Self, String> {
        let mut cfg = Self::default();
        cfg.apply_env()?;
        Ok(cfg)
    }

    /// Applies the `DK_*` variables that are set.
    pub fn apply_env(&mut self) -> Result<(), String> {
        let cfg = self;
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        if let Some(v) = var("DK_PORT") {
            cfg.port = v.parse().map_err(|_| format!("DK_PORT: invalid port {v:?}"))?;
        }
        if let Some(v) = var("DK_HOST") {
            cfg.host = v.parse().map_err(|_| format!("DK_HOST: invalid address {v:?}"))?;
        }
        if let Some(v) = var("DK_DATA_DIR") {
            cfg.data_dir = v.into();
        }
        if let Some(v) = var("DK_CORS_ORIGINS") {
            cfg.cors_origins = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        }
        if let Some(v) = var("DK_MAX_IMAGE_AREA") {
            cfg.max_image_area = v.parse().map_err(|_| format!("DK_MAX_IMAGE_AREA: invalid number {v:?}"))?;
        }
        Ok(())
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.host, self.port)
    }
}
