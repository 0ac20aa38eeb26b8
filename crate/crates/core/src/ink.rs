//! Hierarchical online-handwriting data model.
//!
//! A [`Cohort`] owns [`StudentRecord`]s, each student owns [`Drill`]s, each
//! drill owns [`Stroke`]s, and a stroke is an ordered run of [`InkSample`]
//! points captured while the pen is down. All invariants are enforced at
//! construction; once built, the containers hand out immutable views only,
//! so a cohort is safe to share across parallel readers.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Nominal tablet sampling rate in Hz.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 480.0;

/// Validation failure in the pen-recording data model.
#[derive(Debug, Clone, PartialEq)]
pub enum InkError {
    /// A sample field is outside its allowed range.
    SampleOutOfRange {
        field: &'static str,
        value: f64,
    },
    /// A stroke has fewer than two samples.
    StrokeTooShort {
        n_samples: usize,
    },
    /// Timestamps within a stroke are not strictly increasing.
    NonMonotonicTime {
        index: usize,
    },
    /// A drill has no strokes.
    EmptyDrill,
    /// Question/score counts outside `1..=20` / `0..=n_questions`.
    BadQuestionCounts {
        n_questions: u32,
        n_correct: u32,
    },
    /// Grade outside `1..=9`.
    BadGrade {
        grade: u8,
    },
    /// A student has no drills.
    EmptyStudent,
    /// Two students share an id.
    DuplicateStudentId {
        student_id: String,
    },
    /// Sample rate must be positive and finite.
    BadSampleRate {
        rate: f64,
    },
}

impl fmt::Display for InkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InkError::SampleOutOfRange { field, value } => {
                write!(f, "sample field {field} out of range: {value}")
            }
            InkError::StrokeTooShort { n_samples } => {
                write!(f, "stroke needs >=2 samples, got {n_samples}")
            }
            InkError::NonMonotonicTime { index } => {
                write!(f, "non-monotonic t at sample {index}")
            }
            InkError::EmptyDrill => write!(f, "drill has no strokes"),
            InkError::BadQuestionCounts {
                n_questions,
                n_correct,
            } => write!(
                f,
                "invalid question counts: {n_correct} correct of {n_questions}"
            ),
            InkError::BadGrade { grade } => write!(f, "grade {grade} outside 1..=9"),
            InkError::EmptyStudent => write!(f, "student has no drills"),
            InkError::DuplicateStudentId { student_id } => {
                write!(f, "duplicate student id {student_id}")
            }
            InkError::BadSampleRate { rate } => write!(f, "invalid sample rate {rate}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for InkError {}

/// One digitizer sample: position, pressure, and pen attitude at time `t`.
///
/// `t` is in seconds relative to the start of the drill; `x`, `y`, `z` and
/// `tip_width` are in device length units; `pressure` is normalized to
/// `[0, 1]`; tilt angles are degrees in `[-90, 90]`. `z` (hover height) and
/// `tip_width` are carried for fidelity to the capture format but no feature
/// reads them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InkSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub pressure: f64,
    pub tilt_x: f64,
    pub tilt_y: f64,
    pub tip_width: f64,
}

impl InkSample {
    /// Checks the per-sample range invariants.
    pub fn validate(&self) -> Result<(), InkError> {
        let checks: [(&'static str, f64, bool); 4] = [
            ("t", self.t, self.t >= 0.0 && self.t.is_finite()),
            (
                "pressure",
                self.pressure,
                (0.0..=1.0).contains(&self.pressure),
            ),
            ("tilt_x", self.tilt_x, (-90.0..=90.0).contains(&self.tilt_x)),
            ("tilt_y", self.tilt_y, (-90.0..=90.0).contains(&self.tilt_y)),
        ];
        for (field, value, ok) in checks {
            if !ok {
                return Err(InkError::SampleOutOfRange { field, value });
            }
        }
        if !(self.tip_width >= 0.0) {
            return Err(InkError::SampleOutOfRange {
                field: "tip_width",
                value: self.tip_width,
            });
        }
        if !(self.x.is_finite() && self.y.is_finite() && self.z.is_finite()) {
            return Err(InkError::SampleOutOfRange {
                field: "x/y/z",
                value: f64::NAN,
            });
        }
        Ok(())
    }
}

/// A pen-down run of samples with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    samples: Vec<InkSample>,
}

impl Stroke {
    /// Builds a stroke, enforcing `>=2` samples, per-sample ranges, and
    /// strictly increasing `t`.
    pub fn new(samples: Vec<InkSample>) -> Result<Self, InkError> {
        if samples.len() < 2 {
            return Err(InkError::StrokeTooShort {
                n_samples: samples.len(),
            });
        }
        for sample in &samples {
            sample.validate()?;
        }
        for (i, pair) in samples.windows(2).enumerate() {
            if pair[1].t <= pair[0].t {
                return Err(InkError::NonMonotonicTime { index: i + 1 });
            }
        }
        Ok(Stroke { samples })
    }

    pub fn samples(&self) -> &[InkSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Stroke duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples[self.samples.len() - 1].t - self.samples[0].t
    }
}

/// One answered exercise sheet: its strokes and its human marking.
#[derive(Debug, Clone, PartialEq)]
pub struct Drill {
    drill_id: String,
    strokes: Vec<Stroke>,
    n_questions: u32,
    n_correct: u32,
}

impl Drill {
    pub fn new(
        drill_id: String,
        strokes: Vec<Stroke>,
        n_questions: u32,
        n_correct: u32,
    ) -> Result<Self, InkError> {
        if strokes.is_empty() {
            return Err(InkError::EmptyDrill);
        }
        if !(1..=20).contains(&n_questions) || n_correct > n_questions {
            return Err(InkError::BadQuestionCounts {
                n_questions,
                n_correct,
            });
        }
        Ok(Drill {
            drill_id,
            strokes,
            n_questions,
            n_correct,
        })
    }

    pub fn drill_id(&self) -> &str {
        &self.drill_id
    }

    pub fn strokes(&self) -> &[Stroke] {
        &self.strokes
    }

    pub fn n_questions(&self) -> u32 {
        self.n_questions
    }

    pub fn n_correct(&self) -> u32 {
        self.n_correct
    }

    /// Fraction of correctly answered questions, in `[0, 1]`.
    pub fn score_ratio(&self) -> f64 {
        f64::from(self.n_correct) / f64::from(self.n_questions)
    }

    /// True when every question was answered correctly.
    pub fn is_perfect(&self) -> bool {
        self.n_correct == self.n_questions
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub fn as_str(self) -> &'static str {
        match self {
            Hand::Left => "left",
            Hand::Right => "right",
        }
    }
}

/// One student: demographic header plus all recorded drills.
///
/// `age` is optional capture metadata; no prediction task reads it.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentRecord {
    student_id: String,
    grade: u8,
    gender: Gender,
    writing_hand: Hand,
    dominant_hand: Hand,
    age: Option<u8>,
    drills: Vec<Drill>,
}

impl StudentRecord {
    pub fn new(
        student_id: String,
        grade: u8,
        gender: Gender,
        writing_hand: Hand,
        dominant_hand: Hand,
        age: Option<u8>,
        drills: Vec<Drill>,
    ) -> Result<Self, InkError> {
        if !(1..=9).contains(&grade) {
            return Err(InkError::BadGrade { grade });
        }
        if drills.is_empty() {
            return Err(InkError::EmptyStudent);
        }
        Ok(StudentRecord {
            student_id,
            grade,
            gender,
            writing_hand,
            dominant_hand,
            age,
            drills,
        })
    }

    pub fn student_id(&self) -> &str {
        &self.student_id
    }

    pub fn grade(&self) -> u8 {
        self.grade
    }

    pub fn gender(&self) -> Gender {
        self.gender
    }

    pub fn writing_hand(&self) -> Hand {
        self.writing_hand
    }

    pub fn dominant_hand(&self) -> Hand {
        self.dominant_hand
    }

    pub fn age(&self) -> Option<u8> {
        self.age
    }

    pub fn drills(&self) -> &[Drill] {
        &self.drills
    }

    /// Fraction of this student's drills answered with a perfect score.
    pub fn perfect_ratio(&self) -> f64 {
        let perfect = self.drills.iter().filter(|d| d.is_perfect()).count();
        perfect as f64 / self.drills.len() as f64
    }
}

/// A set of students recorded at a common sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    students: Vec<StudentRecord>,
    sample_rate_hz: f64,
}

impl Cohort {
    /// Builds a cohort, rejecting duplicate student ids and bad rates.
    pub fn new(students: Vec<StudentRecord>, sample_rate_hz: f64) -> Result<Self, InkError> {
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(InkError::BadSampleRate {
                rate: sample_rate_hz,
            });
        }
        for (i, a) in students.iter().enumerate() {
            for b in &students[i + 1..] {
                if a.student_id == b.student_id {
                    return Err(InkError::DuplicateStudentId {
                        student_id: a.student_id.clone(),
                    });
                }
            }
        }
        Ok(Cohort {
            students,
            sample_rate_hz,
        })
    }

    pub fn students(&self) -> &[StudentRecord] {
        &self.students
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn n_students(&self) -> usize {
        self.students.len()
    }

    pub fn n_drills(&self) -> usize {
        self.students.iter().map(|s| s.drills().len()).sum()
    }
}

/// Free-function form of [`Drill::score_ratio`].
pub fn score_ratio(drill: &Drill) -> f64 {
    drill.score_ratio()
}

/// Free-function form of [`StudentRecord::perfect_ratio`].
pub fn perfect_ratio(student: &StudentRecord) -> f64 {
    student.perfect_ratio()
}
