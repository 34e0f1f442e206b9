//! Structural JSON shapes for validating provider output.

use std::fmt;

use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// A JSON string.
    Text,
    /// A string, number or boolean; normalized to a string before decoding.
    Scalar,
    List(Box<Shape>),
    /// Required keys with their shapes. Unlisted keys are ignored.
    Object(Vec<(&'static str, Shape)>),
}

impl Shape {
    pub fn list(inner: Shape) -> Self {
        Shape::List(Box::new(inner))
    }

    pub fn object<const N: usize>(fields: [(&'static str, Shape); N]) -> Self {
        Shape::Object(fields.into_iter().collect())
    }

    /// Validates `value` in place, converting `Scalar` positions to strings.
    pub fn conform(&self, value: &mut Value) -> Result<(), ShapeViolation> {
        self.conform_at(value, &mut String::from("$"))
    }

    fn conform_at(&self, value: &mut Value, path: &mut String) -> Result<(), ShapeViolation> {
        match (self, &mut *value) {
            (Shape::Text, Value::String(_)) => Ok(()),
            (Shape::Scalar, Value::String(_)) => Ok(()),
            (Shape::Scalar, Value::Number(n)) => {
                *value = Value::String(n.to_string());
                Ok(())
            }
            (Shape::Scalar, Value::Bool(b)) => {
                *value = Value::String(b.to_string());
                Ok(())
            }
            (Shape::List(inner), Value::Array(items)) => {
                for (i, item) in items.iter_mut().enumerate() {
                    let len = path.len();
                    path.push_str(&format!("[{i}]"));
                    inner.conform_at(item, path)?;
                    path.truncate(len);
                }
                Ok(())
            }
            (Shape::Object(fields), Value::Object(map)) => {
                for (key, shape) in fields {
                    let len = path.len();
                    path.push('.');
                    path.push_str(key);
                    match map.get_mut(*key) {
                        Some(v) => shape.conform_at(v, path)?,
                        None => {
                            return Err(ShapeViolation { path: path.clone(), expected: shape.describe(), found: "missing".into() })
                        }
                    }
                    path.truncate(len);
                }
                Ok(())
            }
            (shape, other) => Err(ShapeViolation {
                path: path.clone(),
                expected: shape.describe(),
                found: kind(other).into(),
            }),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Shape::Text | Shape::Scalar => "string".into(),
            Shape::List(inner) => format!("list[{}]", inner.describe()),
            Shape::Object(fields) => {
                let inner: Vec<String> = fields.iter().map(|(k, s)| format!("\"{k}\": {}", s.describe())).collect();
                format!("{{{}}}", inner.join(", "))
            }
        }
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeViolation {
    pub path: String,
    pub expected: String,
    pub found: String,
}

impl fmt::Display for ShapeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at {}: expected {}, found {}", self.path, self.expected, self.found)
    }
}

/// Pulls the first JSON value out of provider text, tolerating code fences
/// and leading prose.
pub fn extract_json(raw: &str) -> Result<Value, String> {
    let trimmed = raw.trim();
    if let Ok(v) = serde_json::from_str(trimmed) {
        return Ok(v);
    }
    let start = trimmed.find(['{', '[']).ok_or_else(|| "no JSON value in response".to_string())?;
    let mut stream = serde_json::Deserializer::from_str(&trimmed[start..]).into_iter::<Value>();
    match stream.next() {
        Some(Ok(v)) => Ok(v),
        Some(Err(e)) => Err(format!("invalid JSON: {e}")),
        None => Err("no JSON value in response".into()),
    }
}
