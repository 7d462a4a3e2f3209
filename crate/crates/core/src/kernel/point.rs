use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::HyperboloidPoint;

/// An element of one of the kernel domains.
///
/// Channel indices are zero-based: a matrix kernel with `ℓ` channels
/// accepts `channel ∈ 0..ℓ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Point {
    Euclidean(Vec<f64>),
    /// `(u, x)` with `u` a site of any domain and `x ∈ ℝ^m`.
    Product { site: Box<Point>, spatial: Vec<f64> },
    Hyperboloid(HyperboloidPoint),
    /// `(x, i)`: a base point tagged with an output channel.
    Channel { base: Box<Point>, channel: usize },
}

impl Point {
    pub fn euclidean(coords: impl Into<Vec<f64>>) -> Result<Point> {
        let coords = coords.into();
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("euclidean coordinates must be finite".into()));
        }
        Ok(Point::Euclidean(coords))
    }

    pub fn product(site: Point, spatial: impl Into<Vec<f64>>) -> Result<Point> {
        let spatial = spatial.into();
        if spatial.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("spatial coordinates must be finite".into()));
        }
        Ok(Point::Product {
            site: Box::new(site),
            spatial,
        })
    }

    pub fn channel(base: Point, channel: usize) -> Point {
        Point::Channel {
            base: Box::new(base),
            channel,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Point::Euclidean(_) => "euclidean",
            Point::Product { .. } => "product",
            Point::Hyperboloid(_) => "hyperboloid",
            Point::Channel { .. } => "channel",
        }
    }

    pub fn as_euclidean(&self) -> Result<&[f64]> {
        match self {
            Point::Euclidean(c) => Ok(c),
            other => Err(Error::Type(format!(
                "expected a euclidean point, got {}",
                other.kind()
            ))),
        }
    }

    pub fn as_product(&self) -> Result<(&Point, &[f64])> {
        match self {
            Point::Product { site, spatial } => Ok((site, spatial)),
            other => Err(Error::Type(format!(
                "expected a product point, got {}",
                other.kind()
            ))),
        }
    }

    pub fn as_hyperboloid(&self) -> Result<&HyperboloidPoint> {
        match self {
            Point::Hyperboloid(h) => Ok(h),
            other => Err(Error::Type(format!(
                "expected a hyperboloid point, got {}",
                other.kind()
            ))),
        }
    }

    pub fn as_channel(&self) -> Result<(&Point, usize)> {
        match self {
            Point::Channel { base, channel } => Ok((base, *channel)),
            other => Err(Error::Type(format!(
                "expected a channel point, got {}",
                other.kind()
            ))),
        }
    }

    /// All real coordinates in a fixed traversal order, tagged by variant.
    /// Two points are equal iff their keys are equal bit-for-bit.
    pub fn key(&self) -> Vec<u64> {
        let mut out = Vec::new();
        self.push_key(&mut out);
        out
    }

    fn push_key(&self, out: &mut Vec<u64>) {
        match self {
            Point::Euclidean(c) => {
                out.push(0);
                out.push(c.len() as u64);
                out.extend(c.iter().map(|v| v.to_bits()));
            }
            Point::Product { site, spatial } => {
                out.push(1);
                site.push_key(out);
                out.push(spatial.len() as u64);
                out.extend(spatial.iter().map(|v| v.to_bits()));
            }
            Point::Hyperboloid(h) => {
                out.push(2);
                out.push(h.x().len() as u64);
                out.extend(h.x().iter().map(|v| v.to_bits()));
                out.push(h.t().to_bits());
            }
            Point::Channel { base, channel } => {
                out.push(3);
                base.push_key(out);
                out.push(*channel as u64);
            }
        }
    }
}
