package controller

import (
	"fmt"
	"log"
	"strings"
)

// Resource is implemented by every kind the controller tracks.
type Resource interface {
	BelongTo(id string) error
}

type Controller struct {
	resources []Resource
}

func (c *Controller) Reconcile(ev string) {
	errChan := make(chan error, 1)
	go checkResources(c.resources, ev, errChan)
	if err := <-errChan; err != nil {
		log.Errorf("resource belongs to: %v", err)
	}
}

func checkResources(resources []Resource, id string, errChan chan error) {
	for _, r := range resources {
		if err := r.BelongTo(id); err != nil {
			errChan <- err
			return
		}
	}
	errChan <- nil
}

// splitResourceID expects action-policy-account-cluster.
func splitResourceID(id string) ([]string, error) {
	parts := strings.Split(id, "-")
	if len(parts) != 4 {
		return nil, fmt.Errorf("invalid resourceID: %s", id)
	}
	return parts, nil
}

type AccessPolicy struct {
	owner string
}

func (x *AccessPolicy) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of access policy: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("access policy %s is owned by another account", parts[1])
	}
	return nil
}

type Cluster struct {
	owner string
}

func (x *Cluster) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of cluster: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("cluster %s is owned by another account", parts[1])
	}
	return nil
}

type Account struct {
	owner string
}

func (x *Account) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of account: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("account %s is owned by another account", parts[1])
	}
	return nil
}

type Project struct {
	owner string
}

func (x *Project) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of project: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("project %s is owned by another account", parts[1])
	}
	return nil
}

type Namespace struct {
	owner string
}

func (x *Namespace) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of namespace: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("namespace %s is owned by another account", parts[1])
	}
	return nil
}

type Volume struct {
	owner string
}

func (x *Volume) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of volume: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("volume %s is owned by another account", parts[1])
	}
	return nil
}

type Snapshot struct {
	owner string
}

func (x *Snapshot) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of snapshot: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("snapshot %s is owned by another account", parts[1])
	}
	return nil
}

type Bucket struct {
	owner string
}

func (x *Bucket) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of bucket: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("bucket %s is owned by another account", parts[1])
	}
	return nil
}

type Gateway struct {
	owner string
}

func (x *Gateway) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of gateway: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("gateway %s is owned by another account", parts[1])
	}
	return nil
}

type Route struct {
	owner string
}

func (x *Route) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of route: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("route %s is owned by another account", parts[1])
	}
	return nil
}

type Certificate struct {
	owner string
}

func (x *Certificate) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of certificate: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("certificate %s is owned by another account", parts[1])
	}
	return nil
}

type Secret struct {
	owner string
}

func (x *Secret) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of secret: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("secret %s is owned by another account", parts[1])
	}
	return nil
}

type Quota struct {
	owner string
}

func (x *Quota) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of quota: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("quota %s is owned by another account", parts[1])
	}
	return nil
}

type Tenant struct {
	owner string
}

func (x *Tenant) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of tenant: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("tenant %s is owned by another account", parts[1])
	}
	return nil
}

type Node struct {
	owner string
}

func (x *Node) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of node: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("node %s is owned by another account", parts[1])
	}
	return nil
}

type Subnet struct {
	owner string
}

func (x *Subnet) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of subnet: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("subnet %s is owned by another account", parts[1])
	}
	return nil
}

type Firewall struct {
	owner string
}

func (x *Firewall) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of firewall: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("firewall %s is owned by another account", parts[1])
	}
	return nil
}

type Image struct {
	owner string
}

func (x *Image) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of image: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("image %s is owned by another account", parts[1])
	}
	return nil
}

type Registry struct {
	owner string
}

func (x *Registry) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of registry: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("registry %s is owned by another account", parts[1])
	}
	return nil
}

type Pipeline struct {
	owner string
}

func (x *Pipeline) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of pipeline: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("pipeline %s is owned by another account", parts[1])
	}
	return nil
}

type Alarm struct {
	owner string
}

func (x *Alarm) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of alarm: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("alarm %s is owned by another account", parts[1])
	}
	return nil
}

type Dashboard struct {
	owner string
}

func (x *Dashboard) BelongTo(id string) error {
	parts, err := splitResourceID(id)
	if err != nil {
		return fmt.Errorf("failed to split resourceID of dashboard: %w", err)
	}
	if parts[2] != x.owner {
		return fmt.Errorf("dashboard %s is owned by another account", parts[1])
	}
	return nil
}
