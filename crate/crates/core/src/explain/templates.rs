//! Fixed English templates filled from a decision path.

use crate::features::FeatureKey;
use crate::models::{Branch, PathStep};
use crate::stream::{Axis, ClassLabel, ClassSet, Sensor};

use super::Interval;

pub struct TemplateInputs<'a> {
    pub path: &'a [PathStep],
    pub prediction: ClassLabel,
    pub confidence: f64,
    pub classes: &'a ClassSet,
    pub variance: &'a dyn Fn(&FeatureKey) -> Option<f64>,
    pub threshold: f64,
    pub interval: Option<Interval>,
}

/// "a", "a and b", "a, b and c".
fn join_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn plural(n: usize) -> &'static str {
    if n == 1 {
        ""
    } else {
        "s"
    }
}

fn push_unique<T: PartialEq>(v: &mut Vec<T>, x: T) {
    if !v.contains(&x) {
        v.push(x);
    }
}

fn class_word(classes: &ClassSet, label: ClassLabel) -> String {
    classes.name(label).replace('_', " ")
}

fn sensor_phrase(axis: Axis, sensor: Sensor) -> String {
    if sensor.is_scalar() {
        sensor.display_word().to_string()
    } else {
        format!("{axis} {}", sensor.display_word())
    }
}

/// `h:mm:ss` of a session timestamp.
pub fn clock(t: f64) -> String {
    let s = t.max(0.0).floor() as u64;
    format!("{}:{:02}:{:02}", s / 3600, s / 60 % 60, s % 60)
}

fn template_1(path: &[PathStep]) -> String {
    // (axis, sensor) tuples in path order, each with its components and windows
    let mut tuples: Vec<((Axis, Sensor), Vec<String>, Vec<String>)> = Vec::new();
    for step in path {
        let a = step.key.address;
        let id = (a.axis, a.sensor);
        let idx = match tuples.iter().position(|t| t.0 == id) {
            Some(i) => i,
            None => {
                tuples.push((id, Vec::new(), Vec::new()));
                tuples.len() - 1
            }
        };
        push_unique(&mut tuples[idx].1, step.key.metric.as_str().to_string());
        if let Some(w) = step.key.window {
            push_unique(&mut tuples[idx].2, w.as_str().to_string());
        }
    }
    if tuples.is_empty() {
        return "No split node defines the decision path.".to_string();
    }
    let parts: Vec<String> = tuples
        .iter()
        .map(|((axis, sensor), comps, wins)| {
            let mut s = format!(
                "{} value{} of the {}",
                join_list(comps),
                plural(comps.len()),
                sensor_phrase(*axis, *sensor)
            );
            if !wins.is_empty() {
                s.push_str(&format!(
                    " within the {} window{}",
                    join_list(wins),
                    plural(wins.len())
                ));
            }
            s
        })
        .collect();
    let verb = if parts.len() == 1 && tuples[0].1.len() == 1 {
        "defines"
    } else {
        "define"
    };
    format!("The {} {verb} the decision path.", parts.join(" and "))
}

fn component(key: &FeatureKey) -> String {
    match key.window {
        Some(w) => format!("{} ({})", key.metric.as_str(), w.as_str()),
        None => key.metric.as_str().to_string(),
    }
}

fn group_by_sensor<'a>(steps: impl Iterator<Item = &'a PathStep>) -> Vec<(Sensor, Vec<String>)> {
    let mut groups: Vec<(Sensor, Vec<String>)> = Vec::new();
    for step in steps {
        let s = step.key.address.sensor;
        let c = component(&step.key);
        match groups.iter_mut().find(|g| g.0 == s) {
            Some(g) => push_unique(&mut g.1, c),
            None => groups.push((s, vec![c])),
        }
    }
    groups
}

fn template_2(inputs: &TemplateInputs) -> String {
    let stable = inputs.path.iter().filter(|s| {
        s.branch == Branch::Left && (inputs.variance)(&s.key).is_some_and(|v| v < inputs.threshold)
    });
    group_by_sensor(stable)
        .into_iter()
        .map(|(sensor, comps)| {
            let one = comps.len() == 1;
            format!(
                "The component{} {} identified suggest{} that the value{} remain{} stable in the {} case.",
                plural(comps.len()),
                join_list(&comps),
                if one { "s" } else { "" },
                plural(comps.len()),
                if one { "s" } else { "" },
                sensor.display_word()
            )
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn template_3(inputs: &TemplateInputs) -> String {
    let word = class_word(inputs.classes, inputs.prediction);
    let changed = inputs.path.iter().filter(|s| s.branch == Branch::Right);
    group_by_sensor(changed)
        .into_iter()
        .map(|(sensor, comps)| {
            let changes: Vec<String> = comps
                .iter()
                .map(|c| format!("a change in the {c} component in the last samples"))
                .collect();
            format!(
                "In the case of the {} {} produce{} the prediction of {word} practice.",
                sensor.display_word(),
                changes.join(" and "),
                if changes.len() == 1 { "s" } else { "" }
            )
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn template_4(inputs: &TemplateInputs) -> String {
    let tail = format!(
        "the last detected sample prediction corresponds to {} practice with {:.0}% confidence.",
        class_word(inputs.classes, inputs.prediction),
        inputs.confidence * 100.0
    );
    match inputs.interval {
        Some(i) => format!(
            "Moreover, a {} practice was detected between {} and {}; {tail}",
            class_word(inputs.classes, ClassLabel(1)),
            clock(i.start_t),
            clock(i.end_t)
        ),
        None => {
            let mut s = tail;
            s[..1].make_ascii_uppercase();
            s
        }
    }
}

/// The four explanation texts. Templates with nothing to report are empty.
pub fn render_templates(inputs: &TemplateInputs) -> [String; 4] {
    [
        template_1(inputs.path),
        template_2(inputs),
        template_3(inputs),
        template_4(inputs),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Metric, WindowKind};
    use crate::stream::SensorAddress;

    fn step(key: &str, branch: Branch) -> PathStep {
        PathStep {
            key: key.parse().unwrap(),
            threshold: 0.0,
            branch,
            value: Some(1.0),
        }
    }

    fn inputs<'a>(
        path: &'a [PathStep],
        classes: &'a ClassSet,
        variance: &'a dyn Fn(&FeatureKey) -> Option<f64>,
    ) -> TemplateInputs<'a> {
        TemplateInputs {
            path,
            prediction: ClassLabel(0),
            confidence: 1.0,
            classes,
            variance,
            threshold: 0.5,
            interval: None,
        }
    }

    #[test]
    fn single_greater_step() {
        let path = [step("Q2:wQ1:right-wrist-accelerometer16g-z", Branch::Right)];
        let classes = ClassSet::nordic_practice();
        let var = |_: &FeatureKey| Some(1.0);
        let texts = render_templates(&inputs(&path, &classes, &var));
        assert_eq!(
            texts[0],
            "The Q2 value of the z accelerometer within the wQ1 window defines the decision path."
        );
        assert_eq!(texts[1], "");
        assert_eq!(
            texts[2],
            "In the case of the accelerometer a change in the Q2 (wQ1) component in the last samples produces the prediction of correct practice."
        );
        assert_eq!(
            texts[3],
            "The last detected sample prediction corresponds to correct practice with 100% confidence."
        );
    }

    #[test]
    fn tuples_listed_once_with_plurals() {
        let path = [
            step("Q2:wQ1:right-wrist-accelerometer16g-z", Branch::Right),
            step("F:wQ3:left-pole-accelerometer16g-z", Branch::Left),
            step("std:wQ1:left-wrist-gyroscope-x", Branch::Left),
        ];
        let classes = ClassSet::nordic_practice();
        let stable_key = FeatureKey::engineered(
            Metric::Std,
            WindowKind::Q1,
            "left-wrist-gyroscope-x".parse::<SensorAddress>().unwrap(),
        );
        let var = move |k: &FeatureKey| Some(if *k == stable_key { 0.1 } else { 2.0 });
        let texts = render_templates(&inputs(&path, &classes, &var));
        assert_eq!(
            texts[0],
            "The Q2 and F values of the z accelerometer within the wQ1 and wQ3 windows and std value of the x gyroscope within the wQ1 window define the decision path."
        );
        assert_eq!(
            texts[1],
            "The component std (wQ1) identified suggests that the value remains stable in the gyroscope case."
        );
    }

    #[test]
    fn interval_clause() {
        let classes = ClassSet::nordic_practice();
        let var = |_: &FeatureKey| None;
        let mut inp = inputs(&[], &classes, &var);
        inp.prediction = ClassLabel(2);
        inp.confidence = 0.874;
        inp.interval = Some(Interval {
            start_n: 0,
            end_n: 100,
            start_t: 130.2,
            end_t: 3725.0,
            length: 101,
        });
        let texts = render_templates(&inp);
        assert_eq!(texts[0], "No split node defines the decision path.");
        assert_eq!(
            texts[3],
            "Moreover, a cheating practice was detected between 0:02:10 and 1:02:05; the last detected sample prediction corresponds to incorrect practice with 87% confidence."
        );
    }
}
