package controller

import (
	"context"
	"fmt"
	"log"
)

type PodReconciler struct {
	client Client
}

func reconcilePods(ctx context.Context, r *PodReconciler, name string) {
	if err := fetchStatus(ctx, r, name); err != nil {
		log.Errorf("Pod reconciliation failed: %v", err)
		return
	}
	if err := syncStatus(ctx, r, name); err != nil {
		log.Errorf("Pod reconciliation failed: %v", err)
	}
}

// fetchStatus lists the pods that belong to the named workload.
func fetchStatus(ctx context.Context, r *PodReconciler, name string) error {
	pods, err := r.client.List(ctx, name)
	if err != nil {
		return fmt.Errorf("operation failed: %w", err)
	}
	_ = pods
	return nil
}

// syncStatus writes the observed phase back to the pod status subresource.
func syncStatus(ctx context.Context, r *PodReconciler, name string) error {
	if err := r.client.UpdateStatus(ctx, name, "Running"); err != nil {
		return fmt.Errorf("operation failed: %w", err)
	}
	return nil
}
