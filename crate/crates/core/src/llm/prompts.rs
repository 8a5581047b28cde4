//! Prompt texts for every agent in the pipeline.
//!
//! The segmentation, scout, specialist, integration, decision and synthesis
//! prompts keep the wording the framework was designed around. Where a prompt
//! needed an explicit input slot or an output-format line to be parseable, the
//! addition is appended after the original text.

use std::sync::OnceLock;

use super::template::PromptTemplate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PromptKind {
    Segmentation,
    Scout,
    Categories,
    Market,
    Product,
    Founder,
    Integration,
    Quant,
    Keywords,
    Synthesis,
    Baseline,
}

impl PromptKind {
    pub const ALL: [PromptKind; 11] = [
        PromptKind::Segmentation,
        PromptKind::Scout,
        PromptKind::Categories,
        PromptKind::Market,
        PromptKind::Product,
        PromptKind::Founder,
        PromptKind::Integration,
        PromptKind::Quant,
        PromptKind::Keywords,
        PromptKind::Synthesis,
        PromptKind::Baseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PromptKind::Segmentation => "segmentation",
            PromptKind::Scout => "scout",
            PromptKind::Categories => "categories",
            PromptKind::Market => "market",
            PromptKind::Product => "product",
            PromptKind::Founder => "founder",
            PromptKind::Integration => "integration",
            PromptKind::Quant => "quant",
            PromptKind::Keywords => "keywords",
            PromptKind::Synthesis => "synthesis",
            PromptKind::Baseline => "baseline",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// A phrase that appears near the top of the rendered prompt and nowhere
    /// else in the template set.
    fn signature(self) -> &'static str {
        match self {
            PromptKind::Segmentation => {
                "Your task is to output one of the options: [L1, L2, L3, L4, L5]"
            }
            PromptKind::Scout => SCOUT_ADDENDUM_SIGNATURE,
            PromptKind::Categories => {
                "categorize the given startup based on the following criteria"
            }
            PromptKind::Market => "Your focus is on the market side.",
            PromptKind::Product => "You are a professional product analyst",
            PromptKind::Founder => "specializing in startup founder assessment",
            PromptKind::Integration => {
                "Imagine you are the chief analyst at a venture capital firm"
            }
            PromptKind::Quant => "You are a final decision-maker.",
            PromptKind::Keywords => "Generate targeted web search keywords",
            PromptKind::Synthesis => {
                "You are a market research analyst. Synthesize the search results"
            }
            PromptKind::Baseline => "Predict whether the following startup will succeed",
        }
    }

    /// Identify which template produced `prompt`.
    ///
    /// The scout prompt embeds the category prompt, so it is matched first.
    pub fn detect(prompt: &str) -> Option<Self> {
        if prompt.contains(SCOUT_ADDENDUM_SIGNATURE) {
            return Some(PromptKind::Scout);
        }
        Self::ALL
            .into_iter()
            .filter(|k| *k != PromptKind::Scout)
            .filter_map(|k| prompt.find(k.signature()).map(|pos| (pos, k)))
            .min()
            .map(|(_, k)| k)
    }

    pub fn template(self) -> &'static PromptTemplate {
        static TEMPLATES: OnceLock<Vec<PromptTemplate>> = OnceLock::new();
        let all = TEMPLATES.get_or_init(|| {
            PromptKind::ALL
                .iter()
                .map(|k| PromptTemplate::new(k.name(), k.body()))
                .collect()
        });
        &all[self as usize]
    }

    fn body(self) -> String {
        match self {
            PromptKind::Segmentation => SEGMENTATION.to_string(),
            PromptKind::Scout => format!("{CATEGORIES}{SCOUT_ADDENDUM}"),
            PromptKind::Categories => CATEGORIES.to_string(),
            PromptKind::Market => MARKET.to_string(),
            PromptKind::Product => PRODUCT.to_string(),
            PromptKind::Founder => FOUNDER.to_string(),
            PromptKind::Integration => INTEGRATION.to_string(),
            PromptKind::Quant => QUANT.to_string(),
            PromptKind::Keywords => KEYWORDS.to_string(),
            PromptKind::Synthesis => SYNTHESIS.to_string(),
            PromptKind::Baseline => BASELINE.to_string(),
        }
    }
}

/// Suffix appended to a prompt when the first answer could not be parsed.
pub const CORRECTIVE_SUFFIX: &str =
    "\n\nYour previous answer could not be parsed. Respond with valid JSON only.";

/// Suffix used when a numeric score could not be found.
pub const SCORE_CORRECTIVE_SUFFIX: &str =
    "\n\nYour previous answer did not contain the requested scores. State each requested score explicitly as `<name> score: X/10`.";

/// Suffix used when the integration answer lacks its closing lines.
pub const DECISION_CORRECTIVE_SUFFIX: &str =
    "\n\nYour previous answer could not be parsed. End with exactly three lines:\nRecommendation: <Invest or Hold>\nOverall score: X/10\nConfidence: <a number between 0 and 1>";

pub const SYSTEM_PROMPT: &str =
    "You are an assistant supporting venture capital startup evaluation.";

pub const NO_EXTERNAL_KNOWLEDGE: &str = "No external knowledge available.";

const SEGMENTATION: &str = "You are an analyst. Your task is to output one of the options: [L1, L2, L3, L4, L5]. Do not output anything else.

Think step by step and consider the following criteria:
- L5: Entrepreneur who has built a $100M+ ARR business, taken a company public, or achieved a sale exceeding $500M.
- L4: Entrepreneur with a small to medium-size exit or who has held a high-level executive role at a notable technology company.
- L3: First time entrepreneur with 10 to 15 years of technical and management experience, often holding advanced degrees or coming from top-tier institutions.
- L2: Entrepreneur with a few years of experience or an accelerator graduate.
- L1: Entrepreneur with negligible experience (e.g., recent graduate or dropout) but with potential.

Based on the founder's LinkedIn profile information below, determine the appropriate segmentation level:
{founder_info}";

const CATEGORIES: &str = "As an analyst specializing in startup evaluation, categorize the given startup based on the following criteria.
Provide a categorical response for each of the following questions based on the startup information provided.
Use ONLY the specified categorical responses for each field. Do not use any other responses.

1. Industry Growth: [Yes/No/N/A]
2. Market Size: [Small/Medium/Large/N/A]
3. Development Pace: [Slower/Same/Faster/N/A]
4. Market Adaptability: [Not Adaptable/Somewhat Adaptable/Very Adaptable/N/A]
5. Execution Capabilities: [Poor/Average/Excellent/N/A]
6. Funding Amount: [Below Average/Average/Above Average/N/A]
7. Valuation Change: [Decreased/Remained Stable/Increased/N/A]
8. Investor Backing: [Unknown/Recognized/Highly Regarded/N/A]
9. Reviews and Testimonials: [Negative/Mixed/Positive/N/A]
10. Product-Market Fit: [Weak/Moderate/Strong/N/A]
11. Sentiment Analysis: [Negative/Neutral/Positive/N/A]
12. Innovation Mentions: [Rarely/Sometimes/Often/N/A]
13. Cutting-Edge Technology: [No/Mentioned/Emphasized/N/A]
14. Timing: [Too Early/Just Right/Too Late/N/A]

Provide your analysis in a JSON format that matches the StartupCategorization schema.
If you cannot determine a category based on the given information, use 'N/A'.
Do not include any explanations or additional text outside of the JSON structure.

Use these JSON keys: industry_growth, market_size, development_pace, market_adaptability, execution_capabilities, funding_amount, valuation_change, investor_backing, reviews_testimonials, product_market_fit, sentiment_analysis, innovation_mentions, cutting_edge_technology, timing.

Startup Information:{startup_info}";

const SCOUT_ADDENDUM_SIGNATURE: &str = "Also include four descriptive fields";

const SCOUT_ADDENDUM: &str = "

Also include four descriptive fields as free text in the same JSON object: name, description, regulatory_approvals, patents.";

const MARKET: &str = "You are a professional agent in a VC firm to analyze a company. Your task is to analyze the company here. Context: {startup_info}

Your focus is on the market side. What is the market? Is the market big enough? Is now the good timing? Will there be a good product-market-fit?

Specifically here are some relevant market information: {market_info}.

Your intern has researched more around the following topic for you as context {keywords}.

The research result: {external_knowledge}

Provide a comprehensive analysis including market size, growth rate, competition, and key trends. Analyze step by step to formulate your comprehensive analysis to answer the questions proposed above.

Also conclude with a market viability score from 1 to 10. ";

const PRODUCT: &str = "You are a professional product analyst in a VC firm evaluating a potential investment opportunity.

Company Information:
{startup_info}

Product Information:
{product_info}

Product Research Report:
{external_knowledge}

Based on this comprehensive product research and the initial data, please provide:
1.Technical Innovation Analysis:
-How innovative is the technology?
-Is it feasible to implement?
-What are the technical risks?

2.Feature Set Evaluation:
-How complete is the product's feature set?
-How does it compare to competitors?
-What are the key differentiators?

3.Implementation Assessment:
-What are the main technical challenges?
-How realistic is the development timeline?
-What resources are required?

4.Market Readiness:
-Is the product ready for its target market?
-What further development is needed?
-How strong is the product-market fit?

Please reference specific data points from the product research report in your analysis, and conclude with:
-Product potential score (1-10)
-Innovation score (1-10)
-Market fit score (1-10)";

const FOUNDER: &str = "As a highly qualified analyst specializing in startup founder assessment, evaluate the founding team based on the provided information.
        Consider the founders' educational background, industry experience, leadership capabilities, and their ability to align and execute on the company's vision.
        Provide a competency score, key strengths, and potential challenges. Please write in great details.

Founder information:
{founder_info}

State the competency score on a 1 to 10 scale as `Competency score: X/10`.";

const INTEGRATION: &str = "Imagine you are the chief analyst at a venture capital firm, tasked with integrating the analyses of multiple specialized teams to provide a comprehensive investment insight. Your output should be structured with detailed scores and justifications:

As the chief analyst, you should stay critical of the company and listen carefully to what your colleagues say. You are also assisted by statistical models trained by your firm. You should not be over confident (or over-critical) for a firm and should rely on your strength of reasoning.
Many startups present themselves with good words but the truth is that few will be successful. It is your task to find those that have the potential to be successful and give your recommendations.

Example 1:
Market Viability: 8.23/10 - The market is on the cusp of a regulatory shift that could open up new demand channels, supported by consumer trends favoring sustainability. Despite the overall growth, regulatory uncertainty poses a potential risk.
Product Viability: 7.36/10 - The product introduces an innovative use of AI in renewable energy management, which is patent-pending. However, it faces competition from established players with deeper market penetration and brand recognition.
Founder Competency: 9.1/10 - The founding team comprises industry veterans with prior successful exits and a strong network in the energy sector. Their track record includes scaling similar startups and navigating complex regulatory landscapes.

Recommendation: Invest. The team's deep industry expertise and innovative product position it well to capitalize on the market's regulatory changes. Although competition is stiff, the founders' experience and network provide a competitive edge crucial for market adoption and navigating potential regulatory hurdles.

Example 2:
Market Viability: 5.31/10 - The market for wearable tech is saturated, with slow growth projections. However, there exists a niche but growing interest in wearables for pet health.
Product Viability: 6.5/10 - The startup's product offers real-time health monitoring for pets, a feature not widely available in the current market. Yet, the product faces challenges with high production costs and consumer skepticism about the necessity of such a device.
Founder Competency: 6.39/10 - The founding team includes passionate pet lovers with backgrounds in veterinary science and tech development. While they possess the technical skills and passion for the project, their lack of business and scaling experience is a concern.

Recommendation: Hold. The unique product offering taps into an emerging market niche, presenting a potential opportunity. However, the combination of a saturated broader market, challenges in justifying the product's value to consumers, and the team's limited experience in business management suggests waiting for clearer signs of product-market fit and strategic direction.

Now, analyze the following:

Market Viability: {market_info}
Product Viability: {product_info}
Founder Competency: {founder_info}
Founder-Idea Fit: {founder_idea_fit}
Founder Segmentation: {founder_segmentation}
Random Forest Prediction: {rf_prediction}

Some context here for the scores:
1. Founder-Idea-Fit ranges from -1 to 1, a stronger number signifies a better fit.
2. Founder Segmentation outcomes range from L1 to L5, with L5 being the most \"competent\" founders, and L1 otherwise.
3. Random Forest Prediction predicts the expected outcome purely based on a statistical model, with an accuracy of around 65%.

Provide an overall investment recommendation based on these inputs. State whether you would advise 'Invest' or 'Hold', including a comprehensive rationale for your decision. Consider all provided predictions and analyses, but do not over-rely on any single prediction.

End your answer with three lines:
Recommendation: <Invest or Hold>
Overall score: X/10
Confidence: <a number between 0 and 1>";

const QUANT: &str = "You are a final decision-maker. Think step by step. You need to consider all the quant metrics and makde a decision.

You are now given Founder Segmentation. With L5 very likely to succeed and L1 least likely. You are also given the Founder-Idea Fit Score, with 1 being most fit and -1 being least fit. You are also given the result of prediction model (which should not be your main evidence because it may not be very accurate).

This table summarises the implications of the Level Segmentation:

{level_table}

Regarding the Founder-Idea-Fit Score. Relevant context are provided here:
The previous sections show the strong correlation between founder's segmentation level and startup's outcome, as L5 founders are more than three times likely to succeed than L1 founders. However, looking into the data, one could also see that there are L5 founders who did not succeed, and there are L1 founders who succeeded. To account for these scenarios, we investigate the fit between founders and their ideas.

To assess quantitatively, we propose a metric called Founder-Idea Fit Score (FIFS). The Founder-Idea Fit Score quantitatively assesses the compatibility between a founder's experience level and the success of their startup idea. Given the revised Preliminary Fit Score (PFS) defined as:
PFS(F, O) = (6 - F) * O - F * (1 - O)
where F represents the founder's level (1 to 5) and O is the outcome (1 for success, 0 for failure), we aim to normalize this score to a range of [-1, 1] to facilitate interpretation.

To achieve this, we note that the minimum PFS value is -5 (for a level 5 founder who fails), and the maximum value is 5 (for a level 1 founder who succeeds). The normalization formula to scale PFS to [-1, 1] is:
Normalized PFS = PFS / 5

Now use all of these information, produce a string of the predicted outcome and probability, with one line of reasoning.

Your response should be in the following format:
{
  \"outcome\": \"<Successful or Unsuccessful>\",
  \"probability\": <probability as a float between 0 and 1>,
  \"reasoning\": \"<One-line reasoning for the decision>\"
}

You will also receive a categorical prediction outcome of the prediction model (which should not be your main evidence because it may not be very accurate, just around 65%).

Ensure that your response is a valid JSON object and includes all the fields mentioned above.

You are provided with the categorical prediction outcome of {rf_prediction}, Founder Segmentation of {Founder_Segmentation}, Founder-Idea Fit of {Founder_Idea_Fit}.";

const KEYWORDS: &str =
    "Generate targeted web search keywords for market research on the startup described below.
Return between 3 and 8 short keyword phrases, separated by commas, and nothing else.
Focus on the market, its growth, trends, size and revenue.

Startup description:
{description}";

const SYNTHESIS: &str = "You are a market research analyst. Synthesize the search results focusing on quantitative data points:

- Market size (in USD)
- Growth rates (CAGR)
- Market share percentages
- Transaction volumes
- Customer acquisition costs
- Revenue metrics
 - Competitive landscape metrics

Format data points clearly and cite their time periods. If exact numbers aren't available, provide ranges based on available data. Prioritize numerical data over qualitative descriptions.

Startup context:
{startup_context}

Search results:
{search_results}";

const BASELINE: &str =
    "Predict whether the following startup will succeed, using only the information given.

Founder information:
{founder_info}

Startup description:
{description}

Your response should be a valid JSON object in the following format and nothing else:
{
  \"outcome\": \"<Successful or Unsuccessful>\",
  \"probability\": <probability of success as a float between 0 and 1>,
  \"reasoning\": \"<One-line reasoning for the decision>\"
}";
