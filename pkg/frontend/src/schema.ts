import { z } from "zod";

// Shape/arity contracts for the ten exported kernels. These mirror the native
// preconditions so a malformed call fails here instead of round-tripping
// through a subprocess; no numeric work happens on this side.

const pair = z.tuple([z.number(), z.number()]);
const gridPair = z.tuple([z.number().int(), z.number().int()]);
const points = z.array(pair).min(1);

const spanOf = (coords: z.ZodTypeAny) =>
  z
    .object({
      coords,
      frame: z.number().int().nonnegative().optional(),
      label: z.string().min(1).optional(),
    })
    .strict();

// truth files key frames by stringified non-negative integers
const frameKey = z.string().regex(/^\d+$/);
const framesOf = (payload: z.ZodTypeAny) =>
  z.object({ frames: z.record(frameKey, payload) }).strict();

export const callSchemas = {
  reward_trajectory: z
    .object({
      pred: z.array(pair).min(1),
      truth: z.array(pair).min(1),
      decay: z.number().positive().optional(),
      n_points: z.number().int().min(1).optional(),
    })
    .strict(),
  reward_affordance: z
    .object({
      pred: points,
      truth: points,
      decay: z.number().positive().optional(),
    })
    .strict(),
  reward_area: z
    .object({
      pred: points,
      truth: z.array(pair).min(3),
    })
    .strict(),
  group_advantages: z
    .object({
      rewards: z.array(z.number()).min(2),
      epsilon_std: z.number().positive().optional(),
    })
    .strict(),
  grpo_surrogate: z
    .object({
      ratios: z.array(z.number()).min(1),
      advantages: z.array(z.number()).min(1),
      kl_terms: z.array(z.number()).optional(),
      eps_low: z.number().optional(),
      eps_high: z.number().optional(),
      beta: z.number().optional(),
    })
    .strict()
    .superRefine((val, ctx) => {
      if (val.advantages.length !== val.ratios.length) {
        ctx.addIssue({
          code: z.ZodIssueCode.custom,
          message: `advantages length ${val.advantages.length} != ratios length ${val.ratios.length}`,
        });
      }
      if (val.kl_terms && val.kl_terms.length !== val.ratios.length) {
        ctx.addIssue({
          code: z.ZodIssueCode.custom,
          message: `kl_terms length ${val.kl_terms.length} != ratios length ${val.ratios.length}`,
        });
      }
    }),
  score_grounding: z
    .object({
      pred: spanOf(z.array(gridPair).length(2)),
      truth: framesOf(z.tuple([z.number(), z.number(), z.number(), z.number()])),
    })
    .strict(),
  score_area: z
    .object({
      pred: spanOf(z.array(gridPair).min(1)),
      truth: framesOf(z.array(pair).min(3)),
    })
    .strict(),
  score_affordance: z
    .object({
      pred: spanOf(z.array(gridPair).min(1)),
      truth: framesOf(points),
      decay: z.number().positive().optional(),
    })
    .strict()
    .superRefine((val, ctx) => {
      // a framed affordance span pins cardinality to a single point
      if (val.pred.frame !== undefined && val.pred.coords.length !== 1) {
        ctx.addIssue({
          code: z.ZodIssueCode.custom,
          message: `framed affordance span needs exactly 1 point, got ${val.pred.coords.length}`,
        });
      }
    }),
  score_trajectory: z
    .object({
      pred: spanOf(z.array(gridPair).min(2).max(10)),
      truth: framesOf(z.array(pair).min(2).max(10)),
      mode: z.enum(["score", "distance"]).optional(),
      decay: z.number().positive().optional(),
    })
    .strict(),
  score_grasp: z
    .object({
      pred: spanOf(z.array(gridPair).length(4)),
      truth: z.object({ rects: z.array(z.array(pair).length(4)).min(1) }).strict(),
      iou_threshold: z.number().optional(),
      angle_threshold: z.number().optional(),
    })
    .strict(),
} as const;

export type KernelName = keyof typeof callSchemas;

export const kernelNames = Object.keys(callSchemas) as KernelName[];

export type KernelArgs<F extends KernelName> = z.infer<(typeof callSchemas)[F]>;
